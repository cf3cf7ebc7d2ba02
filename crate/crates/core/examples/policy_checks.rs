//! Runs a handful of queries through the policy pipeline and prints each verdict.

use std::collections::BTreeMap;

use aqg::guard::{validate, Origin, Policy};
use aqg::mql::parse;
use aqg::relstore::gastros;

fn main() {
    let schemas = gastros::schemas();
    let policy = Policy::default();
    println!("block list: {:?}", policy.block_list);
    println!("forbidden in values: {:?}\n", policy.anti_injection_list);

    let queries = [
        (
            "SELECT Country, COUNT(*) FROM patient GROUP BY Country",
            Origin::Dynamic,
        ),
        ("SELECT Name FROM patient", Origin::Dynamic),
        ("SELECT Country FROM patient", Origin::Dynamic),
        ("SELECT COUNT(*) AS zipcode FROM patient", Origin::Dynamic),
        (
            "SELECT BUCKET(AGE_YEARS(DOB, '2010-12-31'), 18, 40, 60) AS b, COUNT(*) FROM patient GROUP BY b",
            Origin::Dynamic,
        ),
        (
            "SELECT BUCKET(AGE_YEARS(DOB, '2010-12-31'), 18, 40, 60) AS b, COUNT(*) FROM patient GROUP BY b",
            Origin::Stored,
        ),
    ];
    for (text, origin) in queries {
        let ast = parse(text, &schemas).unwrap();
        let v = validate(&ast, &BTreeMap::new(), &policy, origin);
        println!("{origin:?}: {text}");
        if v.accepted {
            println!("  accepted");
        }
        for viol in &v.violations {
            println!("  {viol}");
        }
    }

    let ast = parse("SELECT COUNT(*) FROM patient WHERE Country = :c", &schemas).unwrap();
    for value in ["Germany", "' OR '1'='1"] {
        let params = BTreeMap::from([("c".to_string(), value.to_string())]);
        let v = validate(&ast, &params, &policy, Origin::Dynamic);
        println!("c = {value:?}: accepted={} {:?}", v.accepted, v.rules());
    }
}
