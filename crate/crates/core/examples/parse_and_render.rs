//! Tokenizes, parses and re-renders a query in canonical form, then binds
//! parameters and shows that only literal positions changed.

use std::collections::BTreeMap;

use aqg::mql::{bind_params, infer_types, parse, render, shape, tokenize, NoScreen};
use aqg::relstore::gastros;

fn main() {
    let text = "select Country, COUNT(Report_ID ) AS TotalNum FROM examination, patient \
                WHERE examination.Patient_ID = patient.PID AND Endoscopy_Date BETWEEN :start AND :end \
                GROUP BY Country Order By TotalNum desc";

    for t in tokenize(text).unwrap().iter().take(8) {
        println!("{:>3}  {:<14} {}", t.offset, format!("{:?}", t.kind), t.text);
    }
    println!("...");

    let schemas = gastros::schemas();
    let ast = parse(text, &schemas).unwrap();
    println!("\ncanonical: {}", render(&ast));
    println!("shape:     {}", shape(&ast));
    for p in &ast.params {
        println!("param :{} as {:?}", p.name, p.dtype);
    }

    let raw: BTreeMap<String, String> = [("start", "2010-1-1"), ("end", "2010-12-30")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let bound = bind_params(&ast, &infer_types(&ast, &raw), &NoScreen).unwrap();
    println!("\nbound:     {}", render(&bound.ast));
    assert_eq!(shape(&ast), shape(&bound.ast));

    match parse("SELECT * FROM patient", &schemas) {
        Err(e) => println!("\nSELECT * -> {e}"),
        Ok(_) => unreachable!(),
    }
    match parse("DELETE FROM patient", &schemas) {
        Err(e) => println!("DELETE   -> {e}"),
        Ok(_) => unreachable!(),
    }
}
