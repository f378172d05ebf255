//! Properties of terms, unification, the reader and the size prior.

use abil_core::logic::{apply, parse_term, unify, Substitution, Term, Var};
use abil_core::mil::{log_prior, prior};
use proptest::prelude::*;

/// Variables with ids far above anything the library allocates here.
fn var(i: u64) -> Term {
    Term::Var(Var(50_000_000 + i))
}

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        (0u64..4).prop_map(var),
        (-20i64..20).prop_map(Term::Int),
        prop::sample::select(vec!["a", "b", "nil_x", "hello world"]).prop_map(Term::sym),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (
                prop::sample::select(vec!["f", "g"]),
                prop::collection::vec(inner.clone(), 1..=3)
            )
                .prop_map(|(f, args)| Term::app(f, args)),
            prop::collection::vec(inner, 0..=3).prop_map(Term::list),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_then_parse_is_identity(t in term()) {
        prop_assert_eq!(parse_term(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn unification_is_symmetric(a in term(), b in term()) {
        let empty = Substitution::new();
        let ab = unify(&a, &b, &empty);
        let ba = unify(&b, &a, &empty);
        prop_assert_eq!(ab.is_some(), ba.is_some());
        for s in [ab, ba].into_iter().flatten() {
            prop_assert_eq!(apply(&s, &a), apply(&s, &b));
        }
    }

    #[test]
    fn unifier_is_idempotent(a in term(), b in term()) {
        if let Some(s) = unify(&a, &b, &Substitution::new()) {
            for t in [&a, &b] {
                let once = apply(&s, t);
                prop_assert_eq!(apply(&s, &once), once);
            }
        }
    }

    #[test]
    fn term_unifies_with_itself(t in term()) {
        let s = unify(&t, &t, &Substitution::new()).expect("self-unification");
        prop_assert_eq!(apply(&s, &t), t);
    }
}

#[test]
fn prior_decreases_and_sums_below_one() {
    let mut total = 0.0;
    for c in 1..200 {
        assert!(prior(c + 1) < prior(c));
        assert!((log_prior(c) - prior(c).ln()).abs() < 1e-12);
        total += prior(c);
    }
    assert!(total < 1.0 && total > 0.99);
}
