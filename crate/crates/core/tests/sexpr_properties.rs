mod common;

use kbqa::exec::evaluate;
use kbqa::fixtures::{toy_kb, LfPool};
use kbqa::kb::SchemaKind;
use kbqa::sexpr::{parse, schema_names, validate_schema, LogicalForm, OPERATORS};
use proptest::prelude::*;

fn synthetic_forms() -> impl Strategy<Value = LogicalForm> {
    (any::<u64>(), 0usize..6).prop_map(|(seed, depth)| common::forms(seed, &LfPool::synthetic(), depth, 1).remove(0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonical_print_is_a_parse_fixed_point(lf in synthetic_forms()) {
        let printed = lf.print_canonical();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(&back, &lf.canonicalize());
        prop_assert_eq!(back.print_canonical(), printed);
    }

    #[test]
    fn plain_print_round_trips(lf in synthetic_forms()) {
        prop_assert_eq!(parse(&lf.to_string()).unwrap(), lf);
    }

    #[test]
    fn canonicalize_is_idempotent(lf in synthetic_forms()) {
        let once = lf.canonicalize();
        prop_assert_eq!(once.canonicalize(), once);
    }

    #[test]
    fn and_order_does_not_matter(a in synthetic_forms(), b in synthetic_forms()) {
        let ab = LogicalForm::and(a.clone(), b.clone());
        let ba = LogicalForm::and(b, a);
        prop_assert_eq!(ab.print_canonical(), ba.print_canonical());
    }

    #[test]
    fn unknown_heads_are_rejected(head in "[A-Za-z][A-Za-z_]{0,7}") {
        prop_assume!(!OPERATORS.contains(&head.as_str()));
        let two = format!("({head} sf.engine e1)");
        let one = format!("({head} e1)");
        prop_assert!(parse(&two).is_err());
        prop_assert!(parse(&one).is_err());
    }

    #[test]
    fn canonicalize_preserves_answers(seed in any::<u64>(), n in 2usize..20, t in 0usize..60) {
        let store = common::store(seed, n, t);
        let pool = LfPool::from_store(&store);
        for lf in common::forms(seed ^ 1, &pool, 3, 8) {
            prop_assert_eq!(evaluate(&lf, &store).ok(), evaluate(&lf.canonicalize(), &store).ok(), "{}", lf);
        }
    }

    #[test]
    fn validated_names_are_in_the_catalog(seed in any::<u64>(), n in 2usize..20, t in 0usize..60) {
        let store = common::store(seed, n, t);
        let mut pool = LfPool::from_store(&store);
        pool.classes.push("cls.missing".into());
        pool.relations.push("rel.missing".into());
        for lf in common::forms(seed, &pool, 3, 8) {
            let names = schema_names(&lf);
            let violations = validate_schema(&lf, &store);
            let all_known = names.iter().all(|(kind, name)| store.schema_item(name).is_some_and(|i| i.kind == *kind));
            prop_assert_eq!(violations.is_empty(), all_known, "{}", lf);
            prop_assert!(names.iter().all(|(k, _)| matches!(k, SchemaKind::Class | SchemaKind::Relation)));
        }
    }
}

#[test]
fn canonicalize_preserves_answers_on_the_reference_store() {
    let kb = toy_kb();
    let pool = LfPool::from_store(&kb);
    for lf in common::forms(11, &pool, 4, 500) {
        assert_eq!(evaluate(&lf, &kb).ok(), evaluate(&lf.canonicalize(), &kb).ok(), "{lf}");
    }
}
