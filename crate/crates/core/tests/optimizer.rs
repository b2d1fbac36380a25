use std::collections::BTreeSet;

use subalign_core::aligner::{AlignerConfig, InternalAligner};
use subalign_core::bpe::{learn_bpe, MergeTable, SegmentationScheme, VocabSize};
use subalign_core::corpus::{GoldAlignment, ParallelCorpus};
use subalign_core::metrics::score;
use subalign_core::optimizer::{
    apply_transfer, evaluate_configuration, run_iterative_sampling, Evaluator, OptimizerConfig, OptimizerState,
    SchemePipeline, SearchSpace, SideRange,
};
use subalign_core::synthetic::{generate, SyntheticConfig};

struct Fixture {
    corpus: ParallelCorpus,
    gold: GoldAlignment,
    source: MergeTable,
    target: MergeTable,
}

fn fixture(seed: u64) -> Fixture {
    let cfg =
        SyntheticConfig { train_pairs: 400, eval_pairs: 80, content_words: 200, seed, ..SyntheticConfig::default() };
    let data = generate(&cfg).unwrap();
    let src: Vec<Vec<String>> = data.corpus.source_sentences().map(<[String]>::to_vec).collect();
    let tgt: Vec<Vec<String>> = data.corpus.target_sentences().map(<[String]>::to_vec).collect();
    Fixture {
        source: learn_bpe(&src, 100_000).unwrap(),
        target: learn_bpe(&tgt, 100_000).unwrap(),
        corpus: data.corpus,
        gold: data.gold,
    }
}

fn pipeline(f: &Fixture) -> SchemePipeline<'_, InternalAligner> {
    SchemePipeline::new(&f.corpus, &f.source, &f.target, InternalAligner { config: AlignerConfig::default() })
}

fn config(max_iterations: usize) -> OptimizerConfig {
    OptimizerConfig { budget: 8, random_init: 4, early_stop: 2, seed: 17, max_iterations: Some(max_iterations) }
}

fn run(f: &Fixture, cfg: &OptimizerConfig, resume: Option<OptimizerState>) -> OptimizerState {
    let mut ev = Evaluator::new(pipeline(f));
    run_iterative_sampling(&mut ev, &f.gold, &SearchSpace::full(&f.source, &f.target), cfg, resume).unwrap().0
}

#[test]
fn loop_contract() {
    let f = fixture(3);
    let cfg = config(5);
    let mut ev = Evaluator::new(pipeline(&f));
    let space = SearchSpace::full(&f.source, &f.target);
    let (state, alignment) = run_iterative_sampling(&mut ev, &f.gold, &space, &cfg, None).unwrap();

    assert_eq!(state.f1_trace.len(), state.xi_history.len());
    assert_eq!(state.lambda_history.len(), state.xi_history.len());
    assert!(state.best_so_far().windows(2).all(|w| w[0] <= w[1]));
    let unique: BTreeSet<_> = state.xi_history.iter().collect();
    assert_eq!(unique.len(), state.xi_history.len());

    let deltas = state.deltas();
    let last_improving = deltas.iter().rposition(|&d| d > 0.0).map_or(0, |i| i + 1);
    assert!(state.iterations() <= last_improving + cfg.early_stop);

    let rescored = score(&alignment, &f.gold).unwrap().f1;
    assert_eq!(rescored, state.f1_trace[state.best_prefix_len - 1]);
    assert!(rescored >= state.baseline_f1.unwrap());
}

#[test]
fn same_seed_same_state() {
    let f = fixture(3);
    assert_eq!(run(&f, &config(3), None), run(&f, &config(3), None));
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    let f = fixture(4);
    let full = run(&f, &config(3), None);
    let first = run(&f, &config(1), None);
    assert_eq!(first.iterations(), 1);
    let resumed = run(&f, &config(3), Some(first));
    assert_eq!(full, resumed);
}

#[test]
fn word_only_space_stops_immediately_at_baseline() {
    let f = fixture(5);
    let space = SearchSpace { source: SideRange::word_only(), target: SideRange::word_only(), lambda: (0.0, 1.0) };
    let cfg = OptimizerConfig { early_stop: 1, max_iterations: None, ..config(0) };
    let mut ev = Evaluator::new(pipeline(&f));
    let (state, _) = run_iterative_sampling(&mut ev, &f.gold, &space, &cfg, None).unwrap();
    assert_eq!(state.xi_history, vec![SegmentationScheme::WORD]);
    assert_eq!(state.best_prefix_len, 1);
    assert_eq!(state.f1_trace[0], state.baseline_f1.unwrap());
}

#[test]
fn splitting_compounds_beats_words() {
    let f = fixture(6);
    let aligner = InternalAligner { config: AlignerConfig::default() };
    let word = SegmentationScheme::WORD;
    let base = evaluate_configuration(&f.corpus, &f.gold, &f.source, &f.target, &[word], 0.5, &aligner).unwrap();
    let again = evaluate_configuration(&f.corpus, &f.gold, &f.source, &f.target, &[word], 0.5, &aligner).unwrap();
    assert_eq!(base, again);
    // Few target merges keep stems and suffixes apart.
    let split = SegmentationScheme::new(VocabSize::Word, VocabSize::Merges(f.target.max_merges() / 10));
    let both = evaluate_configuration(&f.corpus, &f.gold, &f.source, &f.target, &[word, split], 0.5, &aligner).unwrap();
    assert!(both.f1 > base.f1, "{} vs {}", both.f1, base.f1);
}

#[test]
fn word_transfer_is_the_word_alignment() {
    let f = fixture(7);
    let mut ev = Evaluator::new(pipeline(&f));
    let word = ev.scheme_alignment(SegmentationScheme::WORD).unwrap().clone();
    let t = apply_transfer(&mut ev, &f.source, &f.target, &[SegmentationScheme::WORD], 0.8).unwrap();
    assert_eq!(t.alignment, word);
    assert!(t.clamped.is_empty());

    let huge = SegmentationScheme::new(VocabSize::Merges(50_000), VocabSize::Merges(1));
    let t = apply_transfer(&mut ev, &f.source, &f.target, &[huge, huge], 0.5).unwrap();
    assert_eq!(
        t.schemes,
        vec![SegmentationScheme::new(VocabSize::Merges(f.source.max_merges()), VocabSize::Merges(1))]
    );
    assert_eq!(t.clamped.len(), 2);
}
