//! Generates the synthetic dataset and writes it as three CSV files.
//!
//! cargo run --example generate_dataset -- [out_dir] [seed]

use aqg::relstore;
use aqg::synthgen::{generate_dataset, GenConfig, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "data".into());
    let seed = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(DEFAULT_SEED);

    let cfg = GenConfig {
        seed,
        ..GenConfig::default()
    };
    let ds = generate_dataset(&cfg)?;
    println!("seed {seed}: {} rows", ds.total_rows());
    let tables = ds.into_tables();
    relstore::save_dir(out.as_ref(), &tables)?;
    for t in &tables {
        println!("  {out}/{}.csv  {:>5} rows", t.name(), t.rows.len());
    }

    // Reload through the validating loader: types and foreign keys are checked.
    let snap = relstore::build_snapshot(relstore::load_dir(out.as_ref(), &relstore::gastros::schemas())?)?;
    let p = snap.table("patient").unwrap();
    println!("first patient: {:?}", p.rows[0]);
    Ok(())
}
