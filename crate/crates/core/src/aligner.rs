//! IBM Model 1 and a diagonally reparameterized Model 2 trained by EM.
//!
//! Both models generate each target token from one source position or from a
//! NULL source. NULL takes a fixed share `p0` of the prior mass. Model 1 spreads
//! the rest uniformly over source positions; Model 2 weights position `i` of
//! `n` for target position `j` of `m` by `exp(-tension * |(i+1)/n - (j+1)/m|)`,
//! normalized over `i`, and learns `tension` by gradient ascent on the
//! expected complete-data log-likelihood.
//!
//! Expected counts are accumulated in linear space with compensated summation,
//! sentence by sentence in corpus order, so a run is bit-reproducible.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::bpe::SegmentedCorpus;
use crate::corpus::{AlignmentSet, Link};
use crate::{Error, FxHashMap, Result};

/// Id of the NULL source symbol in every [`Vocab`].
pub const NULL: u32 = 0;

/// Probability assigned to a pair never seen in training when smoothing is off.
pub const FLOOR_PROB: f64 = 1e-12;

const TENSION_MIN: f64 = 0.5;
const TENSION_MAX: f64 = 20.0;
const TENSION_STEP: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignerConfig {
    pub model1_iterations: u32,
    pub model2_iterations: u32,
    /// Prior probability of aligning a target token to NULL.
    pub null_probability: f64,
    /// Initial diagonal tension for Model 2.
    pub diagonal_tension: f64,
    pub tension_updates_per_iter: u32,
    /// Add-alpha smoothing applied to expected counts in the M-step.
    pub smoothing_alpha: f64,
    /// Not used by the internal aligner, which is deterministic; forwarded to
    /// external aligners.
    pub seed: u64,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        Self {
            model1_iterations: 5,
            model2_iterations: 5,
            null_probability: 0.08,
            diagonal_tension: 4.0,
            tension_updates_per_iter: 8,
            smoothing_alpha: 0.01,
            seed: 0,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.null_probability) {
            return Err(Error::InvalidArgument(format!(
                "null probability {} must lie in [0, 1)",
                self.null_probability
            )));
        }
        if !(self.diagonal_tension >= 0.0 && self.diagonal_tension.is_finite()) {
            return Err(Error::InvalidArgument(format!("diagonal tension {} must be >= 0", self.diagonal_tension)));
        }
        if !(self.smoothing_alpha >= 0.0 && self.smoothing_alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("smoothing alpha {} must be >= 0", self.smoothing_alpha)));
        }
        Ok(())
    }
}

/// Symbol inventory of one side. Id 0 is reserved for NULL.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    ids: FxHashMap<String, u32>,
}

impl Vocab {
    fn new() -> Self {
        Self { words: vec![String::from("<NULL>")], ids: FxHashMap::default() }
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(String::from(s));
        self.ids.insert(String::from(s), id);
        id
    }

    pub fn id(&self, s: &str) -> Option<u32> {
        self.ids.get(s).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Number of symbols including NULL.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 1
    }
}

/// A parallel corpus with both sides interned to integer ids.
#[derive(Debug, Clone)]
pub struct Bitext {
    source_vocab: Arc<Vocab>,
    target_vocab: Arc<Vocab>,
    sentences: Vec<(Vec<u32>, Vec<u32>)>,
}

impl Bitext {
    pub fn new<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [String], &'a [String])>,
    {
        let mut sv = Vocab::new();
        let mut tv = Vocab::new();
        let sentences: Vec<_> = pairs
            .into_iter()
            .map(|(s, t)| {
                (s.iter().map(|w| sv.intern(w)).collect::<Vec<_>>(), t.iter().map(|w| tv.intern(w)).collect::<Vec<_>>())
            })
            .collect();
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self { source_vocab: Arc::new(sv), target_vocab: Arc::new(tv), sentences })
    }

    pub fn from_segmented(corpus: &SegmentedCorpus) -> Result<Self> {
        Self::new(corpus.token_pairs())
    }

    /// The same bitext with source and target exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            source_vocab: self.target_vocab.clone(),
            target_vocab: self.source_vocab.clone(),
            sentences: self.sentences.iter().map(|(s, t)| (t.clone(), s.clone())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentence(&self, s: usize) -> (&[u32], &[u32]) {
        let (a, b) = &self.sentences[s];
        (a, b)
    }

    pub fn source_vocab(&self) -> &Vocab {
        &self.source_vocab
    }

    pub fn target_vocab(&self) -> &Vocab {
        &self.target_vocab
    }
}

/// Lexical translation probabilities `t(target | source)`, sparse over
/// co-occurring pairs. Source id [`NULL`] is the empty source.
#[derive(Debug, Clone)]
pub struct TranslationTable {
    source_vocab: Arc<Vocab>,
    target_vocab: Arc<Vocab>,
    slots: FxHashMap<(u32, u32), u32>,
    /// Slot range of each source id (rows are contiguous).
    rows: Vec<(u32, u32)>,
    probs: Vec<f64>,
    row_floor: Vec<f64>,
}

impl TranslationTable {
    /// Uniform distribution over the targets each source co-occurs with.
    pub fn uniform(bitext: &Bitext) -> Self {
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (src, tgt) in &bitext.sentences {
            for &f in tgt {
                pairs.push((NULL, f));
                pairs.extend(src.iter().map(|&e| (e, f)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut rows = vec![(0u32, 0u32); bitext.source_vocab.len()];
        let mut slots = FxHashMap::default();
        slots.reserve(pairs.len());
        for (slot, &(e, f)) in pairs.iter().enumerate() {
            slots.insert((e, f), slot as u32);
            let row = &mut rows[e as usize];
            if row.1 == 0 {
                row.0 = slot as u32;
            }
            row.1 = slot as u32 + 1;
        }
        let mut probs = vec![0.0; pairs.len()];
        for &(start, end) in &rows {
            let width = (end - start) as f64;
            for p in &mut probs[start as usize..end as usize] {
                *p = 1.0 / width;
            }
        }
        Self {
            source_vocab: bitext.source_vocab.clone(),
            target_vocab: bitext.target_vocab.clone(),
            slots,
            rows,
            probs,
            row_floor: vec![FLOOR_PROB; bitext.source_vocab.len()],
        }
    }

    /// `t(target | source)` by id, falling back to the row's smoothed floor.
    pub fn prob_ids(&self, source: u32, target: u32) -> f64 {
        match self.slots.get(&(source, target)) {
            Some(&slot) => self.probs[slot as usize],
            None => self.row_floor.get(source as usize).copied().unwrap_or(FLOOR_PROB),
        }
    }

    /// `t(target | source)` by string; `None` is the NULL source.
    pub fn prob(&self, source: Option<&str>, target: &str) -> f64 {
        let e = match source {
            None => Some(NULL),
            Some(s) => self.source_vocab.id(s),
        };
        match (e, self.target_vocab.id(target)) {
            (Some(e), Some(f)) => self.prob_ids(e, f),
            _ => FLOOR_PROB,
        }
    }

    /// Sum of each non-empty row, keyed by source id.
    pub fn row_sums(&self) -> Vec<(u32, f64)> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.1 > r.0)
            .map(|(e, &(a, b))| (e as u32, self.probs[a as usize..b as usize].iter().sum()))
            .collect()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    fn sentence_slots(&self, src: &[u32], tgt: &[u32]) -> Vec<u32> {
        // Row-major over j, with position 0 the NULL source and 1..=n the real ones.
        let mut out = Vec::with_capacity((src.len() + 1) * tgt.len());
        for &f in tgt {
            out.push(self.slot(NULL, f));
            out.extend(src.iter().map(|&e| self.slot(e, f)));
        }
        out
    }

    fn slot(&self, e: u32, f: u32) -> u32 {
        self.slots.get(&(e, f)).copied().unwrap_or(u32::MAX)
    }

    fn maximize(&mut self, counts: &CompensatedSums, alpha: f64) {
        for (e, &(start, end)) in self.rows.iter().enumerate() {
            let (start, end) = (start as usize, end as usize);
            if end == start {
                continue;
            }
            let total: f64 = counts.sum[start..end].iter().sum();
            let denom = total + alpha * (end - start) as f64;
            if denom <= 0.0 {
                continue;
            }
            for slot in start..end {
                self.probs[slot] = (counts.sum[slot] + alpha) / denom;
            }
            self.row_floor[e] = if alpha > 0.0 { alpha / denom } else { FLOOR_PROB };
        }
    }
}

struct CompensatedSums {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSums {
    fn new(n: usize) -> Self {
        Self { sum: vec![0.0; n], comp: vec![0.0; n] }
    }

    #[inline]
    fn add(&mut self, slot: usize, x: f64) {
        let y = x - self.comp[slot];
        let t = self.sum[slot] + y;
        self.comp[slot] = (t - self.sum[slot]) - y;
        self.sum[slot] = t;
    }
}

/// Distance of a source/target position pair from the length-normalized diagonal.
#[inline]
pub fn diagonal_distance(i: usize, j: usize, n: usize, m: usize) -> f64 {
    libm::fabs((i + 1) as f64 / n as f64 - (j + 1) as f64 / m as f64)
}

/// Positional prior over source positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositionPrior {
    /// Model 1: every source position equally likely.
    Uniform,
    /// Model 2 with the given diagonal tension.
    Diagonal(f64),
}

impl PositionPrior {
    /// Normalized weights over the `n` source positions for target position `j` of `m`.
    pub fn weights(self, j: usize, n: usize, m: usize) -> Vec<f64> {
        match self {
            PositionPrior::Uniform => vec![1.0 / n as f64; n],
            PositionPrior::Diagonal(tension) => {
                let mut w: Vec<f64> = (0..n).map(|i| libm::exp(-tension * diagonal_distance(i, j, n, m))).collect();
                let z: f64 = w.iter().sum();
                for x in &mut w {
                    *x /= z;
                }
                w
            }
        }
    }
}

/// Per-(n, m) prior matrices, row-major over j.
struct PriorCache {
    prior: PositionPrior,
    cache: FxHashMap<(usize, usize), Vec<f64>>,
}

impl PriorCache {
    fn new(prior: PositionPrior) -> Self {
        Self { prior, cache: FxHashMap::default() }
    }

    fn get(&mut self, n: usize, m: usize) -> &[f64] {
        let prior = self.prior;
        self.cache.entry((n, m)).or_insert_with(|| {
            let mut out = Vec::with_capacity(n * m);
            for j in 0..m {
                out.extend(prior.weights(j, n, m));
            }
            out
        })
    }
}

/// A trained directional model.
#[derive(Debug, Clone)]
pub struct AlignmentModel {
    pub table: TranslationTable,
    pub null_probability: f64,
    pub prior: PositionPrior,
}

impl AlignmentModel {
    /// Unnormalized link weights for target position `j`: element 0 is NULL,
    /// element `i + 1` is source position `i`.
    pub fn link_weights(&self, src: &[u32], tgt: &[u32], j: usize) -> Vec<f64> {
        let p0 = self.null_probability;
        let f = tgt[j];
        let prior = self.prior.weights(j, src.len(), tgt.len());
        let mut w = Vec::with_capacity(src.len() + 1);
        w.push(p0 * self.table.prob_ids(NULL, f));
        w.extend(src.iter().zip(&prior).map(|(&e, &pi)| (1.0 - p0) * pi * self.table.prob_ids(e, f)));
        w
    }

    /// Posterior link distributions of one sentence, one row per target position.
    pub fn posteriors(&self, bitext: &Bitext, s: usize) -> Vec<Vec<f64>> {
        let (src, tgt) = bitext.sentence(s);
        (0..tgt.len())
            .map(|j| {
                let mut w = self.link_weights(src, tgt, j);
                let z: f64 = w.iter().sum();
                if z > 0.0 {
                    for x in &mut w {
                        *x /= z;
                    }
                }
                w
            })
            .collect()
    }

    /// Log-likelihood of the target sides given the source sides.
    pub fn log_likelihood(&self, bitext: &Bitext) -> f64 {
        let mut ll = 0.0;
        for s in 0..bitext.len() {
            let (src, tgt) = bitext.sentence(s);
            for j in 0..tgt.len() {
                let z: f64 = self.link_weights(src, tgt, j).iter().sum();
                ll += libm::log(z);
            }
        }
        ll
    }
}

/// Sufficient statistics of the diagonal tension for fixed link posteriors.
#[derive(Debug, Clone, Default)]
pub struct TensionStats {
    /// Σ posterior · distance over real source positions.
    empirical: f64,
    /// Posterior mass on real positions, per (n, m) and target position.
    mass: BTreeMap<(usize, usize), Vec<f64>>,
    tokens: usize,
}

impl TensionStats {
    /// Collects statistics from the posteriors of `model` on `bitext`.
    pub fn collect(bitext: &Bitext, model: &AlignmentModel) -> Self {
        let mut stats = Self::default();
        for s in 0..bitext.len() {
            let post = model.posteriors(bitext, s);
            let (src, tgt) = bitext.sentence(s);
            for (j, row) in post.iter().enumerate() {
                stats.add(j, src.len(), tgt.len(), &row[1..]);
            }
        }
        stats
    }

    fn add(&mut self, j: usize, n: usize, m: usize, real_posteriors: &[f64]) {
        let mut q_total = 0.0;
        for (i, &q) in real_posteriors.iter().enumerate() {
            self.empirical += q * diagonal_distance(i, j, n, m);
            q_total += q;
        }
        self.mass.entry((n, m)).or_insert_with(|| vec![0.0; m])[j] += q_total;
        self.tokens += 1;
    }

    /// Expected complete-data log-likelihood of the positional prior as a
    /// function of tension, up to an additive constant.
    pub fn expected_log_likelihood(&self, tension: f64) -> f64 {
        let mut ell = -tension * self.empirical;
        for (&(n, m), masses) in &self.mass {
            for (j, &q) in masses.iter().enumerate() {
                let z: f64 = (0..n).map(|i| libm::exp(-tension * diagonal_distance(i, j, n, m))).sum();
                ell -= q * libm::log(z);
            }
        }
        ell
    }

    /// Derivative of [`Self::expected_log_likelihood`] with respect to tension.
    pub fn gradient(&self, tension: f64) -> f64 {
        let mut g = -self.empirical;
        for (&(n, m), masses) in &self.mass {
            for (j, &q) in masses.iter().enumerate() {
                let (mut z, mut hz) = (0.0, 0.0);
                for i in 0..n {
                    let h = diagonal_distance(i, j, n, m);
                    let w = libm::exp(-tension * h);
                    z += w;
                    hz += h * w;
                }
                g += q * hz / z;
            }
        }
        g
    }

    /// Runs `steps` clamped gradient-ascent updates from `tension`.
    pub fn optimize(&self, mut tension: f64, steps: u32) -> f64 {
        if self.tokens == 0 {
            return tension;
        }
        for _ in 0..steps {
            tension += TENSION_STEP * self.gradient(tension) / self.tokens as f64;
            tension = tension.clamp(TENSION_MIN, TENSION_MAX);
        }
        tension
    }
}

/// One EM pass: returns the log-likelihood under the incoming parameters and
/// updates `table` in place.
fn em_iteration(
    bitext: &Bitext,
    slots: &[Vec<u32>],
    table: &mut TranslationTable,
    p0: f64,
    prior: &mut PriorCache,
    alpha: f64,
    mut stats: Option<&mut TensionStats>,
) -> f64 {
    let mut counts = CompensatedSums::new(table.probs.len());
    let mut ll = 0.0;
    let mut w: Vec<f64> = Vec::new();
    for (s, (src, tgt)) in bitext.sentences.iter().enumerate() {
        let (n, m) = (src.len(), tgt.len());
        if n == 0 || m == 0 {
            continue;
        }
        let pri = prior.get(n, m);
        let sl = &slots[s];
        for j in 0..m {
            let row = &sl[j * (n + 1)..(j + 1) * (n + 1)];
            let pj = &pri[j * n..(j + 1) * n];
            w.clear();
            w.push(p0 * table.probs[row[0] as usize]);
            for i in 0..n {
                w.push((1.0 - p0) * pj[i] * table.probs[row[i + 1] as usize]);
            }
            let z: f64 = w.iter().sum();
            if z <= 0.0 {
                continue;
            }
            ll += libm::log(z);
            for (k, &x) in w.iter().enumerate() {
                if x > 0.0 {
                    counts.add(row[k] as usize, x / z);
                }
            }
            if let Some(stats) = stats.as_deref_mut() {
                let inv = 1.0 / z;
                let real: Vec<f64> = w[1..].iter().map(|x| x * inv).collect();
                stats.add(j, n, m, &real);
            }
        }
    }
    table.maximize(&counts, alpha);
    ll
}

fn all_slots(bitext: &Bitext, table: &TranslationTable) -> Vec<Vec<u32>> {
    bitext.sentences.iter().map(|(s, t)| table.sentence_slots(s, t)).collect()
}

/// Trains Model 1 from a uniform start for `config.model1_iterations` EM iterations.
pub fn train_model1(bitext: &Bitext, config: &AlignerConfig) -> Result<TranslationTable> {
    train_model1_traced(bitext, config).map(|(t, _)| t)
}

/// Like [`train_model1`], also returning the log-likelihood measured at the
/// start of each iteration.
pub fn train_model1_traced(bitext: &Bitext, config: &AlignerConfig) -> Result<(TranslationTable, Vec<f64>)> {
    if bitext.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    config.validate()?;
    let mut table = TranslationTable::uniform(bitext);
    let slots = all_slots(bitext, &table);
    let mut prior = PriorCache::new(PositionPrior::Uniform);
    let mut trace = Vec::with_capacity(config.model1_iterations as usize);
    for _ in 0..config.model1_iterations {
        let ll =
            em_iteration(bitext, &slots, &mut table, config.null_probability, &mut prior, config.smoothing_alpha, None);
        trace.push(ll);
    }
    Ok((table, trace))
}

/// Continues training from `init` with the diagonal positional prior,
/// re-estimating the tension after every EM iteration. Returns the table and
/// the final tension.
pub fn train_diag_model2(
    bitext: &Bitext,
    config: &AlignerConfig,
    init: TranslationTable,
) -> Result<(TranslationTable, f64)> {
    if bitext.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    config.validate()?;
    let mut table = init;
    let slots = all_slots(bitext, &table);
    let mut tension = config.diagonal_tension;
    for _ in 0..config.model2_iterations {
        let mut prior = PriorCache::new(PositionPrior::Diagonal(tension));
        let mut stats = TensionStats::default();
        em_iteration(
            bitext,
            &slots,
            &mut table,
            config.null_probability,
            &mut prior,
            config.smoothing_alpha,
            Some(&mut stats),
        );
        tension = stats.optimize(tension, config.tension_updates_per_iter);
    }
    Ok((table, tension))
}

/// Trains the full Model 1 then Model 2 pipeline for one direction.
pub fn train(bitext: &Bitext, config: &AlignerConfig) -> Result<AlignmentModel> {
    let m1 = train_model1(bitext, config)?;
    if config.model2_iterations == 0 {
        return Ok(AlignmentModel {
            table: m1,
            null_probability: config.null_probability,
            prior: PositionPrior::Uniform,
        });
    }
    let (table, tension) = train_diag_model2(bitext, config, m1)?;
    Ok(AlignmentModel { table, null_probability: config.null_probability, prior: PositionPrior::Diagonal(tension) })
}

/// For every sentence and target position, the chosen source position or `None` for NULL.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirectionalAlignment {
    pub sentences: Vec<Vec<Option<usize>>>,
}

impl DirectionalAlignment {
    /// Links in the bitext's own (source, target) convention; NULL produces no link.
    pub fn links(&self) -> AlignmentSet {
        let mut out = AlignmentSet::new();
        for (s, row) in self.sentences.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                if let Some(i) = a {
                    out.insert(Link::new(s, *i, j));
                }
            }
        }
        out
    }
}

/// Scores within this relative distance count as tied, so that equal
/// probabilities reached through different rounding still break toward the
/// smaller position.
const TIE_TOLERANCE: f64 = 1e-12;

fn beats(challenger: f64, incumbent: f64) -> bool {
    challenger > incumbent + TIE_TOLERANCE * incumbent.abs()
}

/// Picks the highest-weight source position (or NULL) for every target token.
/// Ties go to the smallest source index; NULL wins only when strictly better.
pub fn viterbi_align(bitext: &Bitext, model: &AlignmentModel) -> DirectionalAlignment {
    let mut prior = PriorCache::new(model.prior);
    let p0 = model.null_probability;
    let sentences = bitext
        .sentences
        .iter()
        .map(|(src, tgt)| {
            let (n, m) = (src.len(), tgt.len());
            if n == 0 {
                return vec![None; m];
            }
            let pri = prior.get(n, m).to_vec();
            (0..m)
                .map(|j| {
                    let f = tgt[j];
                    let mut best = (0usize, f64::NEG_INFINITY);
                    for (i, &e) in src.iter().enumerate() {
                        let score = (1.0 - p0) * pri[j * n + i] * model.table.prob_ids(e, f);
                        if i == 0 || beats(score, best.1) {
                            best = (i, score);
                        }
                    }
                    let null = p0 * model.table.prob_ids(NULL, f);
                    (!beats(null, best.1)).then_some(best.0)
                })
                .collect()
        })
        .collect();
    DirectionalAlignment { sentences }
}

/// Forward (target tokens choose source positions) and reverse (source tokens
/// choose target positions) alignments, both as (source, target) links.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BidirectionalAlignment {
    pub forward: AlignmentSet,
    pub reverse: AlignmentSet,
}

/// Runs the Model 1 → Model 2 pipeline in both directions.
pub fn align_bidirectional(bitext: &Bitext, config: &AlignerConfig) -> Result<BidirectionalAlignment> {
    let forward_model = train(bitext, config)?;
    let forward = viterbi_align(bitext, &forward_model).links();
    let reversed = bitext.reversed();
    let reverse_model = train(&reversed, config)?;
    let reverse = viterbi_align(&reversed, &reverse_model).links().transposed();
    Ok(BidirectionalAlignment { forward, reverse })
}

/// Anything that can produce directional alignments for a segmented corpus.
pub trait Aligner {
    fn align(&self, corpus: &SegmentedCorpus) -> Result<BidirectionalAlignment>;
}

/// The built-in Model 1 / Model 2 aligner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InternalAligner {
    pub config: AlignerConfig,
}

impl InternalAligner {
    pub fn new(config: AlignerConfig) -> Self {
        Self { config }
    }
}

impl Aligner for InternalAligner {
    fn align(&self, corpus: &SegmentedCorpus) -> Result<BidirectionalAlignment> {
        align_bidirectional(&Bitext::from_segmented(corpus)?, &self.config)
    }
}

impl<A: Aligner + ?Sized> Aligner for &A {
    fn align(&self, corpus: &SegmentedCorpus) -> Result<BidirectionalAlignment> {
        (**self).align(corpus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bitext(pairs: &[(&str, &str)]) -> Bitext {
        let owned: Vec<(Vec<String>, Vec<String>)> =
            pairs.iter().map(|(s, t)| (crate::corpus::split_tokens(s), crate::corpus::split_tokens(t))).collect();
        Bitext::new(owned.iter().map(|(s, t)| (s.as_slice(), t.as_slice()))).unwrap()
    }

    fn plain(iterations: u32) -> AlignerConfig {
        AlignerConfig {
            model1_iterations: iterations,
            model2_iterations: 0,
            null_probability: 0.0,
            smoothing_alpha: 0.0,
            ..AlignerConfig::default()
        }
    }

    #[test]
    fn single_cooccurrence_is_certain() {
        let b = bitext(&[("a", "x")]);
        let t = train_model1(&b, &plain(1)).unwrap();
        assert_eq!(t.prob(Some("a"), "x"), 1.0);
    }

    #[test]
    fn two_pair_corpus_converges() {
        let b = bitext(&[("b c", "x y"), ("b", "x")]);
        let t = train_model1(&b, &plain(10)).unwrap();
        assert!(t.prob(Some("b"), "x") > 0.99);
        // Model 1 from a uniform start: t(x|b) converges fast, t(y|c) slowly.
        assert!((t.prob(Some("b"), "x") - 0.997_035_273_2).abs() < 1e-9);
        assert!((t.prob(Some("c"), "y") - 0.928_999_612_2).abs() < 1e-9);
        let model = AlignmentModel { table: t, null_probability: 0.0, prior: PositionPrior::Uniform };
        let a = viterbi_align(&b, &model);
        assert_eq!(a.sentences[0], vec![Some(0), Some(1)]);
    }

    #[test]
    fn rows_normalized_after_every_iteration() {
        let b = bitext(&[("a b c", "x y"), ("a c", "y z w"), ("d", "w")]);
        for it in 0..6 {
            let cfg = AlignerConfig { model1_iterations: it, ..AlignerConfig::default() };
            let t = train_model1(&b, &cfg).unwrap();
            for (_, sum) in t.row_sums() {
                assert!((sum - 1.0).abs() < 1e-6, "row sum {sum}");
            }
            assert!(t.probabilities().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn viterbi_tie_goes_to_smallest_index() {
        let b = bitext(&[("a b", "x")]);
        let t = train_model1(&b, &plain(3)).unwrap();
        assert_eq!(t.prob(Some("a"), "x"), t.prob(Some("b"), "x"));
        let model = AlignmentModel { table: t, null_probability: 0.0, prior: PositionPrior::Uniform };
        assert_eq!(viterbi_align(&b, &model).sentences[0], vec![Some(0)]);
    }

    #[test]
    fn zero_tension_matches_model1_posteriors() {
        let b = bitext(&[("b c", "x y"), ("b", "x")]);
        let cfg = AlignerConfig {
            model1_iterations: 2,
            model2_iterations: 3,
            diagonal_tension: 0.0,
            tension_updates_per_iter: 0,
            ..AlignerConfig::default()
        };
        let m1 = train_model1(&b, &cfg).unwrap();
        let (m2, tension) = train_diag_model2(&b, &cfg, m1).unwrap();
        assert_eq!(tension, 0.0);
        let cfg1 = AlignerConfig { model1_iterations: 5, ..cfg };
        let m1_more = train_model1(&b, &cfg1).unwrap();
        for (a, b) in m2.probabilities().iter().zip(m1_more.probabilities()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn large_tension_concentrates_on_diagonal() {
        let w = PositionPrior::Diagonal(200.0).weights(1, 4, 2);
        // j = 2 of 2 → diagonal at i = 4 of 4 (index 3).
        assert!(w[3] > 0.999);
        let w = PositionPrior::Diagonal(200.0).weights(0, 3, 3);
        assert!(w[0] > 0.999);
    }

    #[test]
    fn unseen_pairs_use_floor() {
        let b = bitext(&[("a", "x")]);
        let t = train_model1(&b, &AlignerConfig::default()).unwrap();
        assert!(t.prob(Some("a"), "nope") > 0.0);
        assert!(t.prob(Some("zzz"), "x") > 0.0);
    }

    #[test]
    fn symmetric_single_tokens() {
        let b = bitext(&[("a", "x"), ("b", "y"), ("a b", "x y")]);
        let out = align_bidirectional(&b, &AlignerConfig::default()).unwrap();
        assert_eq!(out.forward, out.reverse);
    }

    #[test]
    fn invalid_config_rejected() {
        let b = bitext(&[("a", "x")]);
        let cfg = AlignerConfig { null_probability: 1.0, ..AlignerConfig::default() };
        assert!(train_model1(&b, &cfg).is_err());
    }
}
