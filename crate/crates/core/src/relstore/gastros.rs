//! The fixed endoscopy-registry schema: `patient`, `examination`, `clinicaldetection`.
//!
//! The original application's E-R diagram names the tables but not every column.
//! Columns here are the ones the clinical queries actually touch.

use super::schema::{ColumnDef, ForeignKey, TableSchema};
use super::value::DataType;

pub const PATIENT: &str = "patient";
pub const EXAMINATION: &str = "examination";
pub const CLINICAL_DETECTION: &str = "clinicaldetection";

/// Table names in load order (referenced tables first).
pub const TABLES: [&str; 3] = [PATIENT, EXAMINATION, CLINICAL_DETECTION];

fn enum_of(values: &[&str]) -> DataType {
    DataType::Enum(values.iter().map(|v| v.to_string()).collect())
}

fn fk_to_patient() -> ForeignKey {
    ForeignKey {
        column: "Patient_ID".into(),
        foreign_table: PATIENT.into(),
        foreign_column: "PID".into(),
    }
}

pub fn patient() -> TableSchema {
    TableSchema::new(
        PATIENT,
        vec![
            ColumnDef::new("PID", DataType::Int),
            ColumnDef::new("Name", DataType::Str),
            ColumnDef::new("Gender", enum_of(&["M", "F"])),
            ColumnDef::new("DOB", DataType::Date),
            ColumnDef::new("Country", DataType::Str),
            ColumnDef::new("Address", DataType::Str),
            ColumnDef::new("ZipCode", DataType::Str),
        ],
        "PID",
        vec![],
    )
    .expect("static schema")
}

pub fn examination() -> TableSchema {
    TableSchema::new(
        EXAMINATION,
        vec![
            ColumnDef::new("Report_ID", DataType::Int),
            ColumnDef::new("Patient_ID", DataType::Int),
            ColumnDef::new("Endoscopy_Date", DataType::Date),
            ColumnDef::new("Is_Dialysis", DataType::Bool),
            ColumnDef::new("Diagnoses_Text", DataType::Str),
        ],
        "Report_ID",
        vec![fk_to_patient()],
    )
    .expect("static schema")
}

pub fn clinical_detection() -> TableSchema {
    TableSchema::new(
        CLINICAL_DETECTION,
        vec![
            ColumnDef::new("Detection_ID", DataType::Int),
            ColumnDef::new("Patient_ID", DataType::Int),
            ColumnDef::new("Test_Name", enum_of(&["HBsAg", "Anti-HBs"])),
            ColumnDef::new("Phase", enum_of(&["baseline", "second"])),
            ColumnDef::new("Result", enum_of(&["negative", "positive"])),
            ColumnDef::new("Detection_Date", DataType::Date),
        ],
        "Detection_ID",
        vec![fk_to_patient()],
    )
    .expect("static schema")
}

/// All three schemas, in [`TABLES`] order.
pub fn schemas() -> Vec<TableSchema> {
    vec![patient(), examination(), clinical_detection()]
}
