//! Serializes a result set to the XML document and the X-Columns header.

use aqg::exec::{ResultColumn, ResultSet};
use aqg::relstore::{ScalarType, Value};
use aqg::xmlout;

fn main() {
    let rs = ResultSet {
        columns: vec![
            ResultColumn {
                label: "Gender".into(),
                dtype: ScalarType::Str,
            },
            ResultColumn {
                label: "TotalNum".into(),
                dtype: ScalarType::Int,
            },
        ],
        rows: vec![
            vec![Value::Str("F".into()), Value::Int(184)],
            vec![Value::Str("M".into()), Value::Int(192)],
        ],
        group_sizes: vec![184, 192],
    };
    println!("Content-Type: {}", xmlout::CONTENT_TYPE);
    println!("X-Columns: {}\n", xmlout::columns_header(&rs));
    print!("{}", xmlout::serialize(&rs));

    println!("\n{}", xmlout::escape("Crohn's <disease> & co"));
    println!("{:?}", xmlout::parse_columns_header("BUCKET(x%2C 18),n"));
}
