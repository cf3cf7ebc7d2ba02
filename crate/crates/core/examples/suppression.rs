//! Small-group suppression: the same query under increasing minimum group sizes.

use std::collections::BTreeMap;

use aqg::guard::{Origin, Policy};
use aqg::pipeline::run_text;
use aqg::synthgen::{generate_dataset, GenConfig};

fn main() {
    let snap = generate_dataset(&GenConfig::default())
        .unwrap()
        .into_snapshot()
        .unwrap();
    let text = "SELECT Country, COUNT(DISTINCT patient.PID) AS Patients FROM patient, examination \
                WHERE examination.Patient_ID = patient.PID AND Is_Dialysis = TRUE \
                AND Endoscopy_Date BETWEEN '2011-06-01' AND '2011-06-30' \
                GROUP BY Country ORDER BY Patients DESC";
    for k in [1, 2, 3, 5] {
        let policy = Policy {
            min_group_size: k,
            ..Policy::default()
        };
        let rs = run_text(text, &BTreeMap::new(), &snap, &policy, Origin::Dynamic).unwrap();
        let shown: Vec<String> = rs
            .rows
            .iter()
            .map(|r| format!("{}={}", r[0].to_text(), r[1].to_text()))
            .collect();
        println!("k={k}: {} groups  {}", rs.rows.len(), shown.join(" "));
    }
}
