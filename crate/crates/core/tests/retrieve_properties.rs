mod common;

use kbqa::retrieve::{detect_mentions, rank_elfs, ranker_loss, retrieve_schema, Question, Scorer, ScorerError, TextOracleScorer};
use kbqa::fixtures::{toy_kb, LfPool};
use proptest::prelude::*;

/// Scores by a fixed table, then maps the score through `f`.
struct Mapped<F> {
    inner: TextOracleScorer,
    f: F,
}

impl<F: Fn(f64) -> f64 + Send + Sync> Scorer for Mapped<F> {
    fn score(&self, q: &Question, c: &str) -> Result<f64, ScorerError> {
        Ok((self.f)(self.inner.score(q, c)?))
    }
}

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            Just("item".to_string()),
            (0usize..12).prop_map(|i| i.to_string()),
            "[a-z]{1,4}".prop_map(String::from),
        ],
        0..20,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mentions_are_disjoint_and_bounded(seed in any::<u64>(), text in words(), max_len in 1usize..5) {
        let store = common::store(seed, 12, 10);
        let q = Question::new(&text);
        let ms = detect_mentions(&q, &store, max_len);
        for m in &ms {
            prop_assert!(m.len() >= 1 && m.len() <= max_len);
            prop_assert!(!store.lookup_alias(&m.surface).is_empty(), "{}", m.surface);
        }
        for pair in ms.windows(2) {
            prop_assert!(pair[0].end <= pair[1].start);
        }
    }

    #[test]
    fn loss_is_a_negative_probability(scores in prop::collection::vec(-30.0f64..30.0, 1..12), pick in any::<prop::sample::Index>()) {
        let t = pick.index(scores.len());
        let loss = ranker_loss(&scores, t);
        prop_assert!((-1.0..0.0).contains(&loss), "{}", loss);
        let mut raised = scores.clone();
        raised[t] += 0.5;
        let after = ranker_loss(&raised, t);
        prop_assert!(after <= loss);
        if scores.len() > 1 && loss > -1.0 + 1e-9 {
            prop_assert!(after < loss);
        }
        let shifted: Vec<f64> = scores.iter().map(|s| s + 7.0).collect();
        prop_assert!((ranker_loss(&shifted, t) - loss).abs() < 1e-12);
    }

    #[test]
    fn top_k_survives_monotone_transforms(values in prop::collection::vec(-5i32..5, 1..40), k in 1usize..8) {
        let store = toy_kb();
        let names: Vec<String> = store.classes().chain(store.relations()).map(|i| i.name.clone()).collect();
        let table = TextOracleScorer::from_pairs(names.iter().zip(values.iter().cycle()).map(|(n, v)| (n.clone(), f64::from(*v))));
        let q = Question::new("anything");
        let plain = retrieve_schema(&q, &store, &table, k).unwrap();
        let mapped = retrieve_schema(&q, &store, &Mapped { inner: table.clone(), f: |s: f64| (s * 0.3).exp() + 2.0 }, k).unwrap();
        let names_of = |v: &[kbqa::retrieve::ScoredCandidate<String>]| v.iter().map(|c| c.candidate.clone()).collect::<Vec<_>>();
        prop_assert_eq!(names_of(&plain.classes), names_of(&mapped.classes));
        prop_assert_eq!(names_of(&plain.relations), names_of(&mapped.relations));
        prop_assert!(plain.classes.len() <= k && plain.relations.len() <= k);
        prop_assert!(plain.classes.iter().all(|c| store.is_class(&c.candidate)));
        prop_assert!(plain.relations.iter().all(|c| store.is_relation(&c.candidate)));
        prop_assert!(plain.classes.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn a_designated_form_ranks_first(seed in any::<u64>(), pick in any::<prop::sample::Index>(), k in 1usize..6) {
        let store = common::store(seed, 10, 30);
        let pool = LfPool::from_store(&store);
        let forms = common::forms(seed, &pool, 2, 12);
        let target = forms[pick.index(forms.len())].canonicalize();
        let scorer = TextOracleScorer::from_pairs([(target.print_canonical(), 10.0)]);
        let ranked = rank_elfs(&Question::new("q"), &forms, &scorer, k).unwrap();
        prop_assert_eq!(&ranked[0].candidate, &target);
        prop_assert!(ranked.len() <= k);
    }
}

#[test]
fn loss_reference_values() {
    assert!((ranker_loss(&[0.0, 0.0], 0) + 0.5).abs() < 1e-12);
    assert!((ranker_loss(&[3f64.ln(), 0.0], 0) + 0.75).abs() < 1e-12);
    assert!((ranker_loss(&[0.0], 0) + 1.0).abs() < 1e-12);
}
