use std::collections::BTreeSet;

use kbqa::decode::{BeamConfig, Vocabulary};
use kbqa::exec::{evaluate, is_valid_prediction};
use kbqa::fixtures::{toy_kb, RandomTokenScorer};
use kbqa::pipeline::{answer_f1, hits_at_1, Pipeline, PipelineConfig, Provenance};
use kbqa::retrieve::LexicalScorer;
use kbqa::sexpr::parse;
use proptest::prelude::*;

const QUESTIONS: [&str; 5] = [
    "name the system that has decimetre as a measurement unit",
    "which engine uses lox",
    "how many engines are there",
    "the engine with the highest chamber pressure over 257",
    "what units does the metric system have",
];

fn answers() -> impl Strategy<Value = BTreeSet<String>> {
    prop::collection::btree_set("[a-f]", 0..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn f1_is_symmetric(a in answers(), b in answers()) {
        let (ab, ba) = (answer_f1(&a, &b), answer_f1(&b, &a));
        prop_assert_eq!(ab.f1, ba.f1);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert!((0.0..=1.0).contains(&ab.f1));
    }

    #[test]
    fn hits_extremes(gold in answers(), extra in answers(), seed in any::<u64>()) {
        let sub: BTreeSet<String> = gold.iter().take(2).cloned().collect();
        if !sub.is_empty() {
            prop_assert_eq!(hits_at_1(&sub, &gold, 50, seed), 1.0);
        }
        let disjoint: BTreeSet<String> = extra.iter().map(|s| format!("not-{s}")).collect();
        prop_assert_eq!(hits_at_1(&disjoint, &gold, 50, seed), 0.0);
        let mixed: BTreeSet<String> = gold.union(&extra).cloned().collect();
        prop_assert!((0.0..=1.0).contains(&hits_at_1(&mixed, &gold, 50, seed)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn predictions_respect_the_beam(seed in any::<u64>(), spread in 0.0f64..6.0, q in 0usize..QUESTIONS.len(), beam_size in 1usize..6) {
        let kb = toy_kb();
        let vocab = Vocabulary::for_store(&kb, []).unwrap();
        let retriever = LexicalScorer::new(&kb);
        let generator = RandomTokenScorer::new(seed, vocab.len(), spread);
        let cfg = PipelineConfig { beam: BeamConfig { beam_size, max_len: 24, ..Default::default() }, ..Default::default() };
        let pipeline = Pipeline::new(&kb, &vocab, &retriever, &generator, cfg).unwrap();
        let out = pipeline.predict("q", QUESTIONS[q]).unwrap();
        let again = pipeline.predict("q", QUESTIONS[q]).unwrap();
        prop_assert_eq!(&out.prediction, &again.prediction);
        prop_assert_eq!(&out.hypotheses, &again.hypotheses);

        let p = &out.prediction;
        let valid = |text: &str| parse(text).is_ok_and(|lf| is_valid_prediction(&lf, &kb));
        match p.provenance {
            Provenance::Generated => {
                let rank = p.beam_rank.unwrap();
                prop_assert!(out.hypotheses[..rank].iter().all(|h| !valid(h)));
                prop_assert!(valid(&out.hypotheses[rank]));
            }
            Provenance::ElfFallback => prop_assert!(out.hypotheses.iter().all(|h| !valid(h))),
            Provenance::None => {
                prop_assert!(out.hypotheses.iter().all(|h| !valid(h)));
                prop_assert!(p.logical_form.is_none());
            }
        }
        if let Some(form) = &p.logical_form {
            let lf = parse(form).unwrap();
            prop_assert!(is_valid_prediction(&lf, &kb));
            let expected: Vec<String> = evaluate(&lf, &kb).unwrap().answer_strings().into_iter().collect();
            prop_assert_eq!(p.answers.clone().unwrap(), expected);
        }
    }
}
