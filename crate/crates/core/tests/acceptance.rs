//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use aqg::ctl::main_from;
use aqg::exec::{execute, oracle_execute, ResultColumn, ResultSet};
use aqg::guard::{validate, Origin, Policy, Rule};
use aqg::mql::{bind_params, infer_types, parse, shape, tokenize, BindError, NoScreen, TokenKind};
use aqg::pipeline::{prepare_text, Param, QueryError};
use aqg::registry::{compile, instantiate, seeded_queries, InstantiateError};
use aqg::relstore::{ScalarType, Value};
use aqg::xmlout;
use axum::http::{Method, StatusCode};
use common::http::{Gateway, ROUTES};
use common::{full_snapshot, seeded_params, small_snapshot, structurally_aggregate_only, QueryGen};
use rand::Rng;

const EXPECTED_ROWS: [(&str, usize); 3] = [
    ("patient", 1881),
    ("examination", 2020),
    ("clinicaldetection", 6393),
];
const EXPECTED_TOTAL: usize = 10294;
const GEN_BUDGET: Duration = Duration::from_secs(5);
const QUERY_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_CASES: u64 = 500;
const ORACLE_MAX_ROWS: usize = 50;
const BLOCKED_CASES: u64 = 1000;
const AUDIT_CASES: u64 = 1000;
const BIND_CASES: u64 = 1000;
const INJECTIONS: [&str; 4] = ["' OR '1'='1", "'; DROP TABLE patient; --", "''", "'"];

type Outcome = Result<String, String>;
type Check<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gen_parity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let t = Instant::now();
        let code = main_from(
            ["ctl", "gen", "--out", out_dir.to_str().unwrap()],
            &mut out,
            &mut err,
        );
        let took = t.elapsed();
        ensure(code == 0, || {
            format!("ctl gen exited {code}: {}", String::from_utf8_lossy(&err))
        })?;
        ensure(took < GEN_BUDGET, || format!("ctl gen took {took:?}"))?;
        runs.push((out_dir, took));
    }
    let mut total = 0;
    for (table, want) in EXPECTED_ROWS {
        let file = format!("{table}.csv");
        let a = std::fs::read(runs[0].0.join(&file)).map_err(|e| e.to_string())?;
        let b = std::fs::read(runs[1].0.join(&file)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{file} differs between runs"))?;
        let rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
        ensure(rows == want, || format!("{table}: {rows} rows, want {want}"))?;
        total += rows;
    }
    ensure(total == EXPECTED_TOTAL, || {
        format!("sum {total}, want {EXPECTED_TOTAL}")
    })?;
    let slowest = runs.iter().map(|r| r.1).max().unwrap();
    Ok(format!(
        "1881/2020/6393 rows, sum {total}; csv byte-identical across runs; slowest {slowest:.2?} (< {GEN_BUDGET:?})"
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut nonempty = 0;
    for seed in 0..ORACLE_CASES {
        let s = small_snapshot(seed, ORACLE_MAX_ROWS);
        let q = QueryGen::new(seed).query();
        let ast = parse(&q.text, &s.schemas()).map_err(|e| format!("{}: {e}", q.text))?;
        let b = bind_params(&ast, &infer_types(&ast, &q.params), &NoScreen).map_err(|e| e.to_string())?;
        let fast = execute(&b, &s).map_err(|e| format!("{}: {e}", q.text))?;
        let slow = oracle_execute(&b, &s).map_err(|e| format!("{}: oracle {e}", q.text))?;
        ensure(
            fast.columns == slow.columns && fast.sorted_rows() == slow.sorted_rows(),
            || format!("seed {seed}: {}", q.text),
        )?;
        nonempty += usize::from(!fast.rows.is_empty());
    }
    let s = full_snapshot();
    let policy = Policy::default();
    let mut slowest = Duration::ZERO;
    for d in seeded_queries() {
        let sq = compile(1, &d, &s.schemas(), &policy).map_err(|e| e.to_string())?;
        let b = instantiate(&sq, &seeded_params(&d.name), &policy).map_err(|e| e.to_string())?;
        let t = Instant::now();
        let fast = execute(&b, &s).map_err(|e| e.to_string())?;
        let took = t.elapsed();
        slowest = slowest.max(took);
        ensure(took < QUERY_BUDGET, || format!("{} took {took:?}", d.name))?;
        let slow = oracle_execute(&b, &s).map_err(|e| e.to_string())?;
        ensure(fast == slow, || format!("{} differs from the oracle", d.name))?;
    }
    Ok(format!(
        "{ORACLE_CASES}/{ORACLE_CASES} fuzz cases multiset-equal ({nonempty} non-empty, <= {ORACLE_MAX_ROWS} rows/table); \
         5/5 seeded queries equal on full data; slowest {slowest:.2?} (< {QUERY_BUDGET:?})"
    ))
}

fn mentions_blocked(text: &str, p: &Policy) -> bool {
    tokenize(text).unwrap().iter().any(|t| {
        t.kind == TokenKind::Identifier
            && (p.is_blocked(&t.text) || (t.text.eq_ignore_ascii_case("AGE_YEARS") && p.is_blocked("age")))
    })
}

fn raw(params: &BTreeMap<String, String>) -> BTreeMap<String, Param> {
    params
        .iter()
        .map(|(k, v)| (k.clone(), Param::Raw(v.clone())))
        .collect()
}

fn policy_soundness() -> Outcome {
    let p = Policy::default();
    let s = small_snapshot(7, 30);

    // (a) blocked names at random positions
    for seed in 0..BLOCKED_CASES {
        let (q, site) = QueryGen::new(seed).blocked_query();
        match prepare_text(&q.text, &raw(&q.params), &s, &p, Origin::Dynamic) {
            Err(QueryError::Policy(v)) if v.iter().any(|v| v.rule == Rule::BlockedColumn) => {}
            other => return Err(format!("(a) [{site}] {} -> {other:?}", q.text)),
        }
    }

    // (b) half the stream carries a blocked name
    let mut accepted = 0;
    for seed in 0..AUDIT_CASES {
        let mut g = QueryGen::new(seed ^ 0xA0D1);
        let q = if g.rng().gen_bool(0.5) {
            g.blocked_query().0
        } else {
            g.query()
        };
        let ast = parse(&q.text, &s.schemas()).map_err(|e| e.to_string())?;
        if validate(&ast, &q.params, &p, Origin::Dynamic).accepted {
            accepted += 1;
            ensure(structurally_aggregate_only(&ast), || {
                format!("(b) non-aggregate output: {}", q.text)
            })?;
            ensure(!mentions_blocked(&q.text, &p), || {
                format!("(b) blocked name accepted: {}", q.text)
            })?;
        }
    }

    // (c) injection corpus, dynamic and stored
    let text = "SELECT Country, COUNT(*) FROM patient WHERE Country = :c GROUP BY Country";
    let q1 = compile(1, &seeded_queries()[0], &s.schemas(), &p).map_err(|e| e.to_string())?;
    let mut attempts = 0;
    for bad in INJECTIONS {
        let ps = BTreeMap::from([("c".to_string(), Param::Raw(bad.to_string()))]);
        match prepare_text(text, &ps, &s, &p, Origin::Dynamic) {
            Err(QueryError::Bind(BindError::Injection(_))) => {}
            other => return Err(format!("(c) dynamic {bad:?} -> {other:?}")),
        }
        for slot in ["start", "end"] {
            let mut r = seeded_params("q1");
            r.insert(slot.to_string(), bad.to_string());
            match instantiate(&q1, &r, &p) {
                Err(InstantiateError::Bind(BindError::Injection(n))) if n == slot => {}
                other => return Err(format!("(c) stored {slot}={bad:?} -> {other:?}")),
            }
        }
        attempts += 3;
    }
    let mut bound = 0;
    for seed in 0..BIND_CASES {
        let q = QueryGen::new(seed ^ 0xB1D).parameterized();
        let ast = parse(&q.text, &s.schemas()).map_err(|e| e.to_string())?;
        let b =
            bind_params(&ast, &infer_types(&ast, &q.params), &p).map_err(|e| format!("{}: {e}", q.text))?;
        ensure(shape(&ast) == shape(&b.ast), || {
            format!("(c) shape changed: {}", q.text)
        })?;
        bound += 1;
    }
    Ok(format!(
        "(a) {BLOCKED_CASES}/{BLOCKED_CASES} BLOCKED_COLUMN; (b) {accepted} accepted of {AUDIT_CASES}, 0 audit violations; \
         (c) {attempts}/{attempts} injections rejected at binding, {bound}/{BIND_CASES} binds shape-invariant"
    ))
}

async fn rbac_conformance() -> Outcome {
    let g = Gateway::new(full_snapshot(), Policy::default());
    let org = g.org_a().await;
    let listed = |v: serde_json::Value| -> Vec<String> {
        v["queries"]
            .as_array()
            .map(|a| {
                a.iter()
                    .map(|q| q["url_path"].as_str().unwrap_or("").to_string())
                    .collect()
            })
            .unwrap_or_default()
    };
    let org_list = listed(g.get("/queries", Some(&org)).await.json());
    ensure(org_list == ["queryone", "querytwo"], || {
        format!("org A lists {org_list:?}")
    })?;
    for path in [
        "/q/querythree?start=2010-1-1&end=2010-12-30",
        "/q/queryfour",
        "/q/queryfive",
    ] {
        let st = g.get(path, Some(&org)).await.status;
        ensure(st == StatusCode::FORBIDDEN, || format!("org A {path} -> {st}"))?;
    }
    let admin = g.admin().await;
    let admin_list = listed(g.get("/queries", Some(&admin)).await.json());
    ensure(admin_list.len() == 5, || {
        format!("administrator lists {admin_list:?}")
    })?;
    for (m, path) in ROUTES {
        let r = g
            .call(m.parse().unwrap(), path, None, Some(serde_json::json!({})))
            .await;
        ensure(r.status == StatusCode::UNAUTHORIZED, || {
            format!("{m} {path} without token -> {}", r.status)
        })?;
    }
    let r = g.delete("/admin/roles/administrator", Some(&admin)).await;
    ensure(r.status == StatusCode::CONFLICT, || {
        format!("delete administrator -> {}", r.status)
    })?;
    let still = g.get("/queries", Some(&admin)).await.status;
    ensure(still == StatusCode::OK, || {
        format!("administrator session after refusal -> {still}")
    })?;
    Ok(format!(
        "org A lists 2 and gets 403 on 3; administrator lists 5; {} routes 401 without token; administrator role delete -> 409",
        ROUTES.len()
    ))
}

fn fixture(labels: &[&str], rows: Vec<Vec<Value>>) -> ResultSet {
    ResultSet {
        columns: labels
            .iter()
            .map(|l| ResultColumn {
                label: l.to_string(),
                dtype: ScalarType::Str,
            })
            .collect(),
        group_sizes: vec![1; rows.len()],
        rows,
    }
}

fn wire_format() -> Outcome {
    let s = |x: &str| Value::Str(x.into());
    let gender = xmlout::serialize(&fixture(
        &["Gender", "TotalNum"],
        vec![vec![s("F"), Value::Int(184)], vec![s("M"), Value::Int(192)]],
    ));
    ensure(gender == include_str!("../testdata/golden/gender.xml"), || {
        "gender golden differs".into()
    })?;
    let doc = roxmltree::Document::parse(&gender).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    let items: Vec<_> = root.children().filter(|n| n.is_element()).collect();
    ensure(
        root.tag_name().name() == "dataset"
            && items.len() == 2
            && items.iter().all(|i| {
                i.tag_name().name() == "item"
                    && i.children()
                        .filter(|n| n.is_element())
                        .map(|e| e.tag_name().name())
                        .eq(["element", "element"])
            }),
        || "golden is not dataset/item/element".into(),
    )?;
    let empty = xmlout::serialize(&fixture(&["Country", "TotalNum"], Vec::new()));
    ensure(empty == include_str!("../testdata/golden/empty.xml"), || {
        "empty golden differs".into()
    })?;
    let escaping = xmlout::serialize(&fixture(
        &["a", "b", "c", "d"],
        vec![vec![
            s("Crohn's <disease> & co"),
            s("a \"b\""),
            Value::Null,
            Value::Date(aqg::relstore::Date::new(2010, 1, 1).unwrap()),
        ]],
    ));
    ensure(
        escaping == include_str!("../testdata/golden/escaping.xml"),
        || "escaping golden differs".into(),
    )?;
    Ok("gender, empty and escaping goldens byte-exact; dataset/item/element nesting".into())
}

async fn read_only_surface() -> Outcome {
    let g = Gateway::new(small_snapshot(1, 10), Policy::default());
    let admin = g.admin().await;
    let mut n = 0;
    for m in [Method::PUT, Method::POST, Method::DELETE] {
        for path in [
            "/q/queryone",
            "/q/queryfour",
            "/q/unknown",
            "/q/queryone?start=2010-1-1&end=2010-12-30",
        ] {
            for token in [None, Some(admin.as_str())] {
                let r = g.call(m.clone(), path, token, Some(serde_json::json!({}))).await;
                ensure(r.status == StatusCode::METHOD_NOT_ALLOWED, || {
                    format!("{m} {path} (token: {}) -> {}", token.is_some(), r.status)
                })?;
                n += 1;
            }
        }
    }
    Ok(format!("{n}/{n} PUT/POST/DELETE requests on /q/* -> 405"))
}

fn main() {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .expect("runtime");
    let checks: Vec<Check> = vec![
        ("data-generation parity", Box::new(gen_parity)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("policy soundness", Box::new(policy_soundness)),
        ("rbac conformance", Box::new(|| rt.block_on(rbac_conformance()))),
        ("wire-format fidelity", Box::new(wire_format)),
        ("read-only surface", Box::new(|| rt.block_on(read_only_surface()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({:.2?})", i + 1, t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
