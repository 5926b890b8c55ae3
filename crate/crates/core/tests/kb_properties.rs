mod common;

use std::collections::BTreeSet;
use std::io::Cursor;

use kbqa::kb::{Node, StoreBuilder, TripleFormat, TripleStore};
use proptest::prelude::*;

fn stores() -> impl Strategy<Value = TripleStore> {
    (any::<u64>(), 1usize..30, 0usize..90).prop_map(|(seed, n, t)| common::store(seed, n, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_triple_is_reachable_from_both_indexes(store in stores()) {
        for t in store.triples() {
            let out = store.neighbors_out(&t.subject, Some(&t.relation));
            prop_assert!(out.contains(&(t.relation.clone(), t.object.clone())));
            let inn = store.neighbors_in(&t.object, Some(&t.relation));
            prop_assert!(inn.contains(&(t.relation.clone(), t.subject.clone())));
        }
    }

    #[test]
    fn degree_sums_match_triple_count(store in stores()) {
        let subjects: BTreeSet<_> = store.triples().iter().map(|t| t.subject.clone()).collect();
        let objects: BTreeSet<Node> = store.triples().iter().map(|t| t.object.clone()).collect();
        let out: usize = subjects.iter().map(|s| store.neighbors_out(s, None).len()).sum();
        let inn: usize = objects.iter().map(|o| store.neighbors_in(o, None).len()).sum();
        prop_assert_eq!(out, store.len());
        prop_assert_eq!(inn, store.len());
    }

    #[test]
    fn dump_reloads_identically(store in stores()) {
        let mut buf = Vec::new();
        store.dump(&mut buf).unwrap();
        let back = TripleStore::load_dump(&buf[..]).unwrap();
        prop_assert_eq!(back.triples(), store.triples());
        prop_assert_eq!(back.catalog(), store.catalog());
        for e in store.entities() {
            prop_assert_eq!(back.label(e), store.label(e));
        }
        let mut again = Vec::new();
        back.dump(&mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn tsv_export_reingests_to_the_same_triples(store in stores()) {
        let mut buf = Vec::new();
        store.write_tsv(&mut buf).unwrap();
        let mut b = StoreBuilder::new();
        b.load_triples(Cursor::new(buf), TripleFormat::Tsv).unwrap();
        let back = b.freeze();
        prop_assert_eq!(back.triples(), store.triples());
    }

    #[test]
    fn class_members_match_a_scan(store in stores()) {
        for c in store.classes() {
            let scanned: BTreeSet<_> = store
                .triples()
                .iter()
                .filter(|t| t.relation == store.type_relation() && t.object == Node::entity(&c.name))
                .map(|t| t.subject.clone())
                .collect();
            prop_assert_eq!(store.instances_of(&c.name), scanned);
        }
    }

    #[test]
    fn entity_relations_are_both_directions(store in stores()) {
        for e in store.entities() {
            let mut scanned = BTreeSet::new();
            for t in store.triples() {
                if &t.subject == e || t.object.as_entity() == Some(e) {
                    scanned.insert(t.relation.clone());
                }
            }
            prop_assert_eq!(store.entity_relations(e), scanned);
        }
    }
}
