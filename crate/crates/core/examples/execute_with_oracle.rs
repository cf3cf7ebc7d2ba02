//! Executes the five stored queries on the default dataset with the engine and
//! with the brute-force oracle, and compares the results.

use std::collections::BTreeMap;
use std::time::Instant;

use aqg::exec::{execute, oracle_execute};
use aqg::guard::Policy;
use aqg::registry::{compile, instantiate, seeded_queries};
use aqg::synthgen::{generate_dataset, GenConfig};

fn main() {
    let snap = generate_dataset(&GenConfig::default())
        .unwrap()
        .into_snapshot()
        .unwrap();
    let policy = Policy::default();
    for (i, draft) in seeded_queries().iter().enumerate() {
        let sq = compile(i as u64 + 1, draft, &snap.schemas(), &policy).unwrap();
        let mut raw = BTreeMap::new();
        if !sq.param_specs.is_empty() {
            raw.insert("start".to_string(), "2010-01-01".to_string());
            raw.insert("end".to_string(), "2010-12-30".to_string());
        }
        let bound = instantiate(&sq, &raw, &policy).unwrap();

        let t = Instant::now();
        let fast = execute(&bound, &snap).unwrap();
        let t_fast = t.elapsed();
        let t = Instant::now();
        let slow = oracle_execute(&bound, &snap).unwrap();
        let t_slow = t.elapsed();

        println!(
            "{} ({}): engine {t_fast:.2?}, oracle {t_slow:.2?}, equal: {}",
            draft.name,
            draft.description,
            fast == slow
        );
        println!("  {}", fast.labels().join(" | "));
        for row in &fast.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_text()).collect();
            println!("  {}", cells.join(" | "));
        }
    }
}
