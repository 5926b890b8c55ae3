mod common;

use std::collections::{BTreeSet, HashMap};

use kbqa::decode::{
    beam_search, sequence_nll, BeamConfig, DecodeContext, Grammar, GrammarState, NgramScorer, TokenScorer, TokenTrie,
    TokenId, VocabBuilder, Vocabulary, BOS, EOS,
};
use kbqa::fixtures::{toy_kb, RandomTokenScorer};
use kbqa::sexpr::{parse, validate_schema};
use proptest::prelude::*;
use rand::seq::SliceRandom;

const LINKED: [&str; 3] = ["e1", "sys1", "ox1"];

fn toy() -> (kbqa::kb::TripleStore, Vocabulary, Grammar) {
    let kb = toy_kb();
    let v = Vocabulary::for_store(&kb, []).unwrap();
    let g = Grammar::for_store(&v, &kb, LINKED).unwrap();
    (kb, v, g)
}

fn schema_name() -> impl Strategy<Value = String> {
    (prop::collection::vec("[a-e]{1,3}", 1..3), prop::collection::vec("[a-e]{1,3}", 1..3))
        .prop_map(|(domain, leaf)| format!("{}.{}", domain.join("_"), leaf.join("_")))
}

/// Every complete sequence of at most `max_len` tokens the grammar accepts.
fn accepted(g: &Grammar, max_len: usize) -> Vec<Vec<TokenId>> {
    fn go(g: &Grammar, st: &GrammarState, prefix: &mut Vec<TokenId>, max_len: usize, out: &mut Vec<Vec<TokenId>>) {
        if prefix.len() == max_len {
            return;
        }
        for t in g.allowed(st) {
            let next = g.next(st, t).unwrap();
            prefix.push(t);
            if t == EOS {
                out.push(prefix.clone());
            } else {
                go(g, &next, prefix, max_len, out);
            }
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(g, &g.initial(), &mut Vec::new(), max_len, &mut out);
    out
}

/// Every sequence over all non-begin tokens ending in the end token.
fn all_sequences(vocab_size: usize, max_len: usize) -> Vec<Vec<TokenId>> {
    let body: Vec<TokenId> = (0..vocab_size as TokenId).filter(|&t| t != BOS && t != EOS).collect();
    let mut out = vec![vec![EOS]];
    let mut layer = vec![Vec::new()];
    for _ in 1..max_len {
        layer = layer
            .iter()
            .flat_map(|p: &Vec<TokenId>| body.iter().map(move |&t| [p.as_slice(), &[t]].concat()))
            .collect();
        out.extend(layer.iter().map(|p| [p.as_slice(), &[EOS]].concat()));
    }
    out
}

/// Cumulative log-probability in prefix order, matching the beam's summation.
fn log_prob(s: &dyn TokenScorer, seq: &[TokenId]) -> f64 {
    let ctx = DecodeContext::default();
    (0..seq.len()).fold(0.0, |acc, i| acc + s.next_log_probs(&ctx, &seq[..i]).unwrap()[seq[i] as usize])
}

/// All candidates sorted as the beam sorts finished hypotheses.
fn ranked(s: &dyn TokenScorer, seqs: Vec<Vec<TokenId>>) -> Vec<(Vec<TokenId>, f64)> {
    let mut scored: Vec<_> = seqs.into_iter().map(|q| { let lp = log_prob(s, &q); (q, lp) }).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

fn beam(s: &dyn TokenScorer, g: Option<&Grammar>, beam_size: usize, max_len: usize) -> Vec<(Vec<TokenId>, f64)> {
    let cfg = BeamConfig { beam_size, max_len, constrained: g.is_some(), length_normalize: false };
    beam_search(s, &DecodeContext::default(), g, &cfg).unwrap().into_iter().map(|h| (h.tokens, h.log_prob)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trie_paths_are_exactly_the_inserted_names(names in prop::collection::btree_set(schema_name(), 1..200)) {
        let mut b = VocabBuilder::new();
        for n in &names {
            b.add_schema_name(n).unwrap();
        }
        let v = b.build();
        let trie = TokenTrie::build(names.iter().map(String::as_str), &v).unwrap();
        let encoded: BTreeSet<Vec<TokenId>> = names.iter().map(|n| v.encode_schema_name(n).unwrap()).collect();
        let paths: BTreeSet<Vec<TokenId>> = trie.paths().into_iter().collect();
        prop_assert_eq!(&paths, &encoded);
        for p in &encoded {
            prop_assert!(trie.contains(p));
            prop_assert!(!trie.contains(&p[..p.len() - 1]) || encoded.contains(&p[..p.len() - 1].to_vec()));
        }
    }

    #[test]
    fn allowed_is_what_the_grammar_can_take(seed in any::<u64>()) {
        let (_, v, g) = toy();
        let mut rng = common::rng(seed);
        let mut st = g.initial();
        for _ in 0..60 {
            let brute: Vec<TokenId> = (0..v.len() as TokenId).filter(|&t| g.next(&st, t).is_some()).collect();
            let allowed = g.allowed(&st);
            prop_assert_eq!(&allowed, &brute);
            let Some(&t) = allowed.choose(&mut rng) else { break };
            st = g.next(&st, t).unwrap();
        }
    }

    #[test]
    fn constrained_output_is_always_valid(seed in any::<u64>(), spread in 0.0f64..8.0, beam_size in 1usize..8, max_len in 4usize..30) {
        let (kb, v, g) = toy();
        let s = RandomTokenScorer::new(seed, v.len(), spread);
        for (tokens, _) in beam(&s, Some(&g), beam_size, max_len) {
            prop_assert!(tokens.len() <= max_len);
            prop_assert!(g.accepts(&tokens));
            let lf = parse(&v.decode(&tokens)).unwrap();
            prop_assert!(validate_schema(&lf, &kb).is_empty(), "{}", lf);
            // every step was a token the mask allowed
            let mut st = g.initial();
            for &t in &tokens {
                prop_assert!(g.allowed(&st).contains(&t));
                st = g.next(&st, t).unwrap();
            }
            prop_assert!(st.is_done());
        }
    }

    #[test]
    fn unigram_nll_adds_up(corpus in prop::collection::vec(prop::collection::vec(2u32..9, 0..6), 1..8), target in prop::collection::vec(2u32..9, 0..8)) {
        let size = 9usize;
        let s = NgramScorer::train(&corpus, 1, size);
        let mut counts: HashMap<TokenId, f64> = HashMap::new();
        let mut total = 0.0;
        for seq in &corpus {
            for &t in seq.iter().chain([&EOS]) {
                *counts.entry(t).or_default() += 1.0;
                total += 1.0;
            }
        }
        let mut seq = target.clone();
        seq.push(EOS);
        let expected: f64 = seq.iter().map(|t| -((counts.get(t).copied().unwrap_or(0.0) + 1.0) / (total + size as f64)).ln()).sum();
        let got = sequence_nll(&s, &DecodeContext::default(), &seq).unwrap();
        prop_assert!((got - expected).abs() < 1e-9, "{} vs {}", got, expected);
    }

    #[test]
    fn exhaustive_unconstrained_beam_is_exact(seed in any::<u64>(), spread in 0.0f64..6.0, k in 1usize..10) {
        let (size, max_len) = (5, 4);
        let s = RandomTokenScorer::new(seed, size, spread);
        let exact = ranked(&s, all_sequences(size, max_len));
        let wide = beam(&s, None, size.pow(3), max_len);
        prop_assert_eq!(&wide, &exact);
        // a narrower beam never beats the optimum
        let narrow = beam(&s, None, k, max_len);
        prop_assert!(narrow.len() <= k);
        prop_assert!(narrow[0].1 <= exact[0].1);
        for (tokens, lp) in &narrow {
            prop_assert_eq!(*lp, log_prob(&s, tokens));
        }
    }

    #[test]
    fn exhaustive_constrained_beam_is_exact(seed in any::<u64>(), spread in 0.0f64..6.0, max_len in 3usize..9) {
        let (_, v, g) = toy();
        let s = RandomTokenScorer::new(seed, v.len(), spread);
        let exact = ranked(&s, accepted(&g, max_len));
        let wide = beam(&s, Some(&g), 100_000, max_len);
        prop_assert_eq!(wide, exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unconstrained_optimum_dominates_constrained(seed in any::<u64>(), spread in 0.0f64..6.0) {
        let (_, v, g) = toy();
        let s = RandomTokenScorer::new(seed, v.len(), spread);
        let max_len = 4;
        let free = beam(&s, None, v.len().pow(3), max_len);
        let masked = beam(&s, Some(&g), v.len().pow(3), max_len);
        prop_assert!(!masked.is_empty());
        for (_, lp) in &masked {
            prop_assert!(free[0].1 >= *lp);
        }
    }
}

#[test]
fn narrow_unconstrained_search_can_score_below_constrained() {
    let (_, v, g) = toy();
    let found = (0..500u64).find(|&seed| {
        let s = RandomTokenScorer::new(seed, v.len(), 4.0);
        let free = beam(&s, None, 1, 8);
        let masked = beam(&s, Some(&g), 1, 8);
        !masked.is_empty() && free[0].1 < masked[0].1
    });
    assert!(found.is_some(), "no dominance violation in 500 seeds");
}

/// Best score per beam width over seeds; used to exhibit that narrow beams
/// are not monotone in width.
fn best(seed: u64, width: usize) -> f64 {
    let s = RandomTokenScorer::new(seed, 5, 4.0);
    beam(&s, None, width, 4)[0].1
}

#[test]
fn a_wider_narrow_beam_can_find_a_worse_best() {
    let found = (0..500u64).find(|&seed| (1..4).any(|w| best(seed, w + 1) < best(seed, w)));
    assert!(found.is_some(), "no width regression in 500 seeds");
}

#[test]
fn a_narrow_beam_can_miss_the_optimum() {
    let found = (0..500u64).find(|&seed| {
        let s = RandomTokenScorer::new(seed, 5, 4.0);
        let exact = ranked(&s, all_sequences(5, 4));
        best(seed, 1) < exact[0].1
    });
    assert!(found.is_some(), "greedy search was optimal for 500 seeds");
}

#[test]
fn initial_mask_excludes_bare_atoms() {
    let (_, v, g) = toy();
    let allowed = g.allowed(&g.initial());
    for tok in ["e1", "0", "-", "^^float"] {
        assert!(!allowed.contains(&v.id(tok).unwrap()), "{tok}");
    }
    assert!(allowed.contains(&kbqa::decode::LPAREN));
}
