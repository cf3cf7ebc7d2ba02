mod common;

use std::collections::BTreeMap;

use aqg::exec::execute;
use aqg::guard::{self, apply_suppression, validate, Origin, Policy, Rule};
use aqg::mql::{bind_params, infer_types, parse, shape, tokenize, NoScreen, TokenKind};
use aqg::pipeline::{prepare_text, Param, QueryError};
use aqg::registry::{compile, instantiate, seeded_queries, InstantiateError};
use aqg::relstore::{gastros, Value};
use common::{raw_params, small_snapshot, structurally_aggregate_only, QueryGen};
use proptest::prelude::*;

const INJECTIONS: [&str; 4] = ["' OR '1'='1", "'; DROP TABLE patient; --", "''", "'"];

/// Independent block-list audit over the token stream.
fn mentions_blocked(text: &str, p: &Policy) -> bool {
    tokenize(text).unwrap().iter().any(|t| match t.kind {
        TokenKind::Identifier if t.text.eq_ignore_ascii_case("AGE_YEARS") => p.is_blocked("age"),
        TokenKind::Identifier => p.is_blocked(&t.text),
        _ => false,
    })
}

fn params(kv: &BTreeMap<String, String>) -> BTreeMap<String, Param> {
    kv.iter()
        .map(|(k, v)| (k.clone(), Param::Raw(v.clone())))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn blocked_references_are_rejected(seed in any::<u64>()) {
        let (q, site) = QueryGen::new(seed).blocked_query();
        let ast = parse(&q.text, &gastros::schemas()).unwrap();
        let p = Policy::default();
        let v = validate(&ast, &q.params, &p, Origin::Dynamic);
        prop_assert!(v.rules().contains(&Rule::BlockedColumn), "[{}] {}\n{:?}", site, q.text, v);
    }

    #[test]
    fn verdict_agrees_with_independent_audit(seed in any::<u64>()) {
        let q = QueryGen::new(seed).query();
        let ast = parse(&q.text, &gastros::schemas()).unwrap();
        let p = Policy::default();
        let v = validate(&ast, &q.params, &p, Origin::Dynamic);
        let expected = structurally_aggregate_only(&ast) && !mentions_blocked(&q.text, &p);
        prop_assert_eq!(v.accepted, expected, "{}\n{:?}", q.text, v);
        if v.accepted {
            prop_assert!(structurally_aggregate_only(&ast));
        }
    }

    #[test]
    fn stored_origin_skips_block_list_by_default(seed in any::<u64>()) {
        let (q, _) = QueryGen::new(seed).blocked_query();
        let ast = parse(&q.text, &gastros::schemas()).unwrap();
        let lax = validate(&ast, &q.params, &Policy::default(), Origin::Stored);
        prop_assert!(!lax.rules().contains(&Rule::BlockedColumn));
        let strict = Policy { apply_block_list_to_stored: true, ..Policy::default() };
        let v = validate(&ast, &q.params, &strict, Origin::Stored);
        prop_assert!(v.rules().contains(&Rule::BlockedColumn));
    }

    #[test]
    fn bound_values_never_change_shape(seed in any::<u64>(), values in proptest::collection::vec("[ -~]{0,12}", 4)) {
        let q = QueryGen::new(seed).parameterized();
        let ast = parse(&q.text, &gastros::schemas()).unwrap();
        let p = Policy::default();
        let raw: BTreeMap<String, String> = q
            .params
            .keys()
            .zip(values.iter().cycle())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        if let Ok(b) = bind_params(&ast, &infer_types(&ast, &raw), &p) {
            prop_assert_eq!(shape(&ast), shape(&b.ast));
            prop_assert!(raw.values().all(|v| p.check_injection(v)));
        }
    }

    #[test]
    fn suppression_is_monotone(seed in any::<u64>(), k1 in 1u64..6, dk in 0u64..6) {
        let s = small_snapshot(seed, 50);
        let q = QueryGen::new(seed).query();
        let ast = parse(&q.text, &s.schemas()).unwrap();
        let b = bind_params(&ast, &infer_types(&ast, &q.params), &NoScreen).unwrap();
        let rs = execute(&b, &s).unwrap();
        let at = |k: u64| apply_suppression(rs.clone(), &b, &Policy { min_group_size: k, ..Policy::default() });
        let (lo, hi) = (at(k1), at(k1 + dk));
        prop_assert!(hi.rows.len() <= lo.rows.len());
        let mut rest = lo.rows.iter();
        for row in &hi.rows {
            prop_assert!(rest.any(|r| r == row), "suppression reordered or invented rows");
        }
        let k = k1 + dk;
        for (row, size) in hi.rows.iter().zip(&hi.group_sizes).filter(|_| k > 1) {
            let counts: Vec<i64> = b
                .ast
                .select
                .iter()
                .zip(row)
                .filter(|(item, _)| item.is_aggregate())
                .map(|(_, v)| match v { Value::Int(n) => *n, _ => unreachable!() })
                .collect();
            if counts.is_empty() {
                prop_assert!(*size >= k);
            } else {
                prop_assert!(counts.iter().all(|&n| n >= k as i64));
            }
        }
        prop_assert_eq!(at(1), rs);
    }
}

#[test]
fn injection_corpus_rejected_at_binding() {
    let s = small_snapshot(1, 20);
    let p = Policy::default();
    let text = "SELECT Country, COUNT(*) FROM patient WHERE Country = :c GROUP BY Country";
    for bad in INJECTIONS {
        let err =
            prepare_text(text, &params(&raw_params(&[("c", bad)])), &s, &p, Origin::Dynamic).unwrap_err();
        assert!(matches!(err, QueryError::Bind(_)), "{bad}: {err:?}");
        let v = err.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Injection);
        assert_eq!(v[0].location, "param:c");
    }
    let sq = compile(1, &seeded_queries()[0], &s.schemas(), &p).unwrap();
    for bad in INJECTIONS {
        let r = instantiate(&sq, &raw_params(&[("start", bad), ("end", "2010-12-30")]), &p);
        assert!(
            matches!(r, Err(InstantiateError::Bind(aqg::mql::BindError::Injection(ref n))) if n == "start")
        );
    }
}

#[test]
fn quotes_inside_literals_are_plain_data() {
    let s = small_snapshot(2, 20);
    let text = "SELECT COUNT(*) FROM patient WHERE Country = 'O''Brien; --'";
    let b = prepare_text(text, &BTreeMap::new(), &s, &Policy::default(), Origin::Dynamic).unwrap();
    assert_eq!(execute(&b, &s).unwrap().rows, vec![vec![Value::Int(0)]]);
}

#[test]
fn violations_name_their_location() {
    let ast = parse(
        "SELECT patient.Name, COUNT(*) AS zipcode FROM patient GROUP BY Gender",
        &gastros::schemas(),
    )
    .unwrap();
    let v = validate(&ast, &BTreeMap::new(), &Policy::default(), Origin::Dynamic);
    let shown: Vec<String> = v.violations.iter().map(|v| v.to_string()).collect();
    assert!(
        shown.contains(&"BLOCKED_COLUMN(Name) at select[0]".to_string()),
        "{shown:?}"
    );
    assert!(
        shown
            .iter()
            .any(|s| s.starts_with("BLOCKED_COLUMN(zipcode) at select[1]")),
        "{shown:?}"
    );
    assert!(
        shown.iter().any(|s| s.starts_with("UNGROUPED_COLUMN")),
        "{shown:?}"
    );
}

#[test]
fn policy_file_round_trip() {
    let p = Policy {
        min_group_size: 5,
        apply_block_list_to_stored: true,
        ..Policy::default()
    };
    assert_eq!(Policy::from_toml(&p.to_toml()).unwrap(), p);
    assert!(Policy::from_toml("min_group_size = 0").is_err());
    assert!(Policy::from_toml("block_lst = []").is_err());
    let only = Policy::from_toml("block_list = [\"Country\"]").unwrap();
    assert!(only.is_blocked("country"));
    assert!(!only.is_blocked("name"));
    assert!(guard::check_injection("2010-01-01", &only));
}

#[test]
fn per_patient_groups_vanish_under_suppression() {
    let s = common::full_snapshot();
    let text = "SELECT PID, COUNT(*) FROM patient GROUP BY PID";
    let lax =
        aqg::pipeline::run_text(text, &BTreeMap::new(), &s, &Policy::default(), Origin::Dynamic).unwrap();
    assert_eq!(lax.rows.len(), 1881);
    let k2 = Policy {
        min_group_size: 2,
        ..Policy::default()
    };
    let strict = aqg::pipeline::run_text(text, &BTreeMap::new(), &s, &k2, Origin::Dynamic).unwrap();
    assert!(strict.rows.is_empty());
    let by_gender = aqg::pipeline::run_text(
        "SELECT Gender, COUNT(*) FROM patient GROUP BY Gender",
        &BTreeMap::new(),
        &s,
        &k2,
        Origin::Dynamic,
    )
    .unwrap();
    assert_eq!(by_gender.rows.len(), 2);
}
