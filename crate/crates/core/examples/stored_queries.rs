//! Builds a catalog, grants queries to roles and instantiates a stored query.

use std::collections::BTreeMap;

use aqg::guard::Policy;
use aqg::registry::{instantiate, seeded_queries, Catalog, ParamSpec, QueryDraft, DYNAMIC_QUERY_ID};
use aqg::relstore::{gastros, ScalarType};

fn main() {
    let schemas = gastros::schemas();
    let policy = Policy::default();
    let mut catalog = Catalog::new();
    for d in seeded_queries() {
        let id = catalog.register(&d, &schemas, &policy).unwrap();
        println!("registered {id}: /q/{}  {}", d.url_path, d.description);
    }

    let mut draft = QueryDraft {
        name: "since".into(),
        description: "Examinations since a date".into(),
        url_path: "since".into(),
        sql: "SELECT COUNT(*) AS Exams FROM examination WHERE Endoscopy_Date >= :from".into(),
        param_specs: vec![ParamSpec::required("from", ScalarType::Date)],
        enabled: true,
    };
    draft.param_specs[0].default = Some("2011-01-01".into());
    let since = catalog.register(&draft, &schemas, &policy).unwrap();

    let org_a = 2;
    for q in [1, 2, DYNAMIC_QUERY_ID] {
        catalog.grant(org_a, q).unwrap();
    }
    println!("\nrole {org_a} sees:");
    for q in catalog.list_for_role(org_a) {
        println!("  {} -> /q/{}", q.name, q.url_path);
    }
    println!("dynamic granted: {}", catalog.is_granted(org_a, DYNAMIC_QUERY_ID));

    let sq = catalog.get(since).unwrap();
    let bound = instantiate(sq, &BTreeMap::new(), &policy).unwrap();
    println!("\nwith default: {}", aqg::mql::render(&bound.ast));

    let sq = catalog.resolve_path("queryone").unwrap();
    let raw = BTreeMap::from([("start".to_string(), "2010-1-1".to_string())]);
    println!("missing end: {}", instantiate(sq, &raw, &policy).unwrap_err());
}
