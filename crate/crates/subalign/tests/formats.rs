use std::collections::BTreeSet;

use proptest::prelude::*;
use subalign::formats::{read_gold_naacl, read_pharaoh, write_pharaoh, StateFile};
use subalign_core::bpe::SegmentationScheme;
use subalign_core::corpus::{AlignmentSet, Link};
use subalign_core::optimizer::{OptimizerConfig, OptimizerState, SearchSpace, SideRange, Trial};

fn alignment(sentences: usize) -> impl Strategy<Value = AlignmentSet> {
    prop::collection::vec((0..sentences, 0..40usize, 0..40usize), 0..300)
        .prop_map(|v| v.into_iter().map(|(s, i, j)| Link::new(s, i, j)).collect())
}

proptest! {
    #[test]
    fn pharaoh_round_trip(a in alignment(50)) {
        let mut buf = Vec::new();
        write_pharaoh(&mut buf, &a, 50).unwrap();
        let back = read_pharaoh(buf.as_slice()).unwrap();
        prop_assert_eq!(back.sentences, 50);
        prop_assert_eq!(back.alignment, a);
    }

    #[test]
    fn gold_keeps_sure_within_possible(lines in prop::collection::vec((1..20usize, 1..9usize, 1..9usize, prop::option::of(prop::bool::ANY)), 1..60)) {
        let text: String = lines
            .iter()
            .map(|(s, i, j, label)| match label {
                None => format!("{s} {i} {j}\n"),
                Some(true) => format!("{s} {i} {j} S\n"),
                Some(false) => format!("{s} {i} {j} P\n"),
            })
            .collect();
        let gold = read_gold_naacl(text.as_bytes(), true).unwrap();
        prop_assert!(gold.sure().is_subset(gold.possible()));
        let ids: BTreeSet<usize> = gold.possible().sentence_ids();
        prop_assert!(ids.is_subset(gold.covered_sentences()));
    }
}

#[test]
fn state_file_round_trip() {
    let mut state = OptimizerState::new(9);
    state.baseline_f1 = Some(0.5);
    let cell: SegmentationScheme =
        "WORD".parse::<subalign_core::bpe::VocabSize>().map(|w| SegmentationScheme::new(w, w)).unwrap();
    state.xi_history.push(cell);
    state.lambda_history.push(0.25);
    state.f1_trace.push(0.5);
    state.best_prefix_len = 1;
    state.all_trials.push(Trial { iteration: 0, scheme: cell, lambda: 0.25, f1: 0.5 });
    let file = StateFile {
        seed: 9,
        config: OptimizerConfig::default(),
        space: SearchSpace {
            source: SideRange::word_only(),
            target: SideRange { merges: Some((0, 10)), word: true },
            lambda: (0.0, 1.0),
        },
        state,
    };
    let json = file.to_json().unwrap();
    assert!(json.contains("\"WORD\""));
    assert_eq!(StateFile::from_json(&json).unwrap(), file);
}

proptest! {
    #[test]
    fn state_file_floats_survive_a_round_trip(f1 in prop::collection::vec(0.0..1.0f64, 1..20), lambda in 0.0..1.0f64) {
        let mut state = OptimizerState::new(1);
        state.baseline_f1 = Some(f1[0]);
        for &f in &f1 {
            state.xi_history.push(SegmentationScheme::WORD);
            state.lambda_history.push(lambda);
            state.f1_trace.push(f);
        }
        state.best_prefix_len = f1.len();
        let file = StateFile { seed: 1, config: OptimizerConfig::default(), space: SearchSpace { source: SideRange::word_only(), target: SideRange::word_only(), lambda: (0.0, 1.0) }, state };
        let back = StateFile::from_json(&file.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), file.to_json().unwrap());
        prop_assert_eq!(back, file);
    }
}
