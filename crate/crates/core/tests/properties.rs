use std::collections::BTreeSet;

use proptest::prelude::*;

use dstkit::fuzzy::{repair_state, MatchConfig};
use dstkit::ingest::{
    build_pseudo_lexicon, corpus_from_json, corpus_to_json, corpus_tokens, generate_synthetic, translate_corpus,
    SplitSizes, SynthConfig,
};
use dstkit::linearize::{linearize_state, parse_state};
use dstkit::metrics::{joint_goal_accuracy, slot_f1, EvalReport};
use dstkit::model::Vocabulary;
use dstkit::types::{canonical_order, state_diff, DialogueState, DomainSchema, Ontology, SlotSchema, StateTriplet};

fn word() -> impl Strategy<Value = String> {
    "[a-zé北京]{1,5}"
}

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..4).prop_map(|w| w.join(" "))
}

fn ontology() -> impl Strategy<Value = Ontology> {
    let slot = (phrase(), prop::collection::vec(phrase(), 1..4));
    let domain = (phrase(), prop::collection::vec(slot, 1..4));
    prop::collection::vec(domain, 1..4).prop_map(|domains| {
        let mut seen = BTreeSet::new();
        let domains = domains
            .into_iter()
            .filter(|(d, _)| seen.insert(d.clone()))
            .map(|(name, slots)| {
                let mut names = BTreeSet::new();
                DomainSchema {
                    name,
                    slots: slots
                        .into_iter()
                        .filter(|(s, _)| names.insert(s.clone()))
                        .map(|(name, values)| SlotSchema { name, values })
                        .collect(),
                }
            })
            .collect();
        Ontology::new(domains).unwrap()
    })
}

/// An ontology and a state over it; `choices[i]` picks (absent | known value | fresh value).
fn ontology_and_state() -> impl Strategy<Value = (Ontology, DialogueState)> {
    ontology().prop_flat_map(|onto| {
        let n = onto.n_slots();
        (
            Just(onto),
            prop::collection::vec((0u8..3, any::<prop::sample::Index>(), phrase()), n),
        )
            .prop_map(|(onto, choices)| {
                let mut state = DialogueState::new();
                for (key, (kind, idx, fresh)) in onto.slot_keys().zip(choices) {
                    let value = match kind {
                        0 => continue,
                        1 => idx.get(onto.values(&key.domain, &key.slot).unwrap()).clone(),
                        _ => fresh,
                    };
                    state.insert(StateTriplet::new(&key.domain, &key.slot, &value).unwrap());
                }
                (onto, state)
            })
    })
}

proptest! {
    #[test]
    fn parse_inverts_linearize((onto, state) in ontology_and_state()) {
        let seq = linearize_state(&state, &onto).unwrap();
        prop_assert!(seq.is_well_formed());
        let parsed = parse_state(&seq.tokens, &onto);
        prop_assert_eq!(parsed.state, state);
        prop_assert_eq!(parsed.report.dropped, 0);
    }

    #[test]
    fn canonical_order_is_a_permutation((onto, state) in ontology_and_state()) {
        let ordered = canonical_order(&state, &onto).unwrap();
        prop_assert_eq!(ordered.len(), state.len());
        let back: DialogueState = ordered.iter().cloned().collect();
        prop_assert_eq!(back, state);
        let positions: Vec<_> = ordered.iter().map(|t| onto.position(t.domain(), t.slot()).unwrap()).collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn repair_is_idempotent((onto, state) in ontology_and_state(), cutoff in 0.0f64..1.0) {
        let cfg = MatchConfig { cutoff, ..MatchConfig::default() };
        let once = repair_state(&state, &onto, &cfg);
        let twice = repair_state(&once.state, &onto, &cfg);
        prop_assert_eq!(&twice.state, &once.state);
        prop_assert_eq!(twice.counts.replaced, 0);
    }

    #[test]
    fn diff_applies((onto, a) in ontology_and_state(), seed in any::<u64>()) {
        let b: DialogueState = a.iter().enumerate().filter(|(i, _)| (seed >> (i % 64)) & 1 == 1)
            .map(|(_, t)| t.clone()).collect();
        prop_assert_eq!(state_diff(&a, &b).apply(&a), b.clone());
        prop_assert_eq!(state_diff(&b, &a).apply(&b), a.clone());
        prop_assert!(state_diff(&a, &a).is_empty());
        let _ = onto;
    }

    #[test]
    fn metrics_are_bounded_and_consistent(pairs in prop::collection::vec((ontology_and_state(), ontology_and_state()), 1..6)) {
        let pred: Vec<DialogueState> = pairs.iter().map(|((_, p), _)| p.clone()).collect();
        let gold: Vec<DialogueState> = pairs.iter().map(|(_, (_, g))| g.clone()).collect();
        let jga = joint_goal_accuracy(&pred, &gold).unwrap();
        let sf1 = slot_f1(&pred, &gold).unwrap();
        prop_assert!((0.0..=1.0).contains(&jga));
        prop_assert!((0.0..=1.0).contains(&sf1));
        prop_assert!(sf1 >= jga - 1e-12);
        prop_assert_eq!(joint_goal_accuracy(&gold, &gold).unwrap(), 1.0);
        prop_assert_eq!(slot_f1(&gold, &gold).unwrap(), 1.0);
        let report = EvalReport::compute(&pred, &gold, 0).unwrap();
        prop_assert_eq!(report.joint_goal_accuracy, jga);
        prop_assert_eq!(report.slot_f1, sf1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthetic_corpora_survive_json_and_translation(seed in any::<u64>()) {
        let cfg = SynthConfig {
            seed,
            n_dialogues: SplitSizes { train: 6, validation: 2, test: 2 },
            n_domains: 2,
            ..SynthConfig::default()
        };
        let corpus = generate_synthetic(&cfg).unwrap();
        let back = corpus_from_json(&corpus_to_json(&corpus).unwrap()).unwrap();
        prop_assert_eq!(&back, &corpus);

        let lex = build_pseudo_lexicon(corpus_tokens(&corpus), seed).unwrap();
        let twin = translate_corpus(&corpus, &lex, "zz").unwrap();
        let restored = translate_corpus(&twin, &lex.inverse(), corpus.language()).unwrap();
        prop_assert_eq!(&restored, &corpus);

        let vocab = Vocabulary::build([&corpus, &twin]);
        for w in vocab.words() {
            let t = dstkit::linearize::Token::word(w);
            prop_assert_eq!(vocab.decode(&[vocab.id(&t)]), vec![t]);
        }
    }
}
