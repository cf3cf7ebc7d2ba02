use crate::relstore::{Date, Value};

/// Whole years between `dob` and `reference`.
pub fn age_on(dob: Date, reference: Date) -> i64 {
    let before_birthday = (reference.month(), reference.day()) < (dob.month(), dob.day());
    (reference.year() - dob.year()) as i64 - before_birthday as i64
}

/// Label of the bracket `x` falls in: `<b1`, `b1-(b2-1)`, ..., `bk+`.
pub fn bucket_label(x: i64, bounds: &[i64]) -> String {
    match bounds.iter().position(|&b| x < b) {
        Some(0) => format!("<{}", bounds[0]),
        Some(i) => format!("{}-{}", bounds[i - 1], bounds[i] - 1),
        None => format!("{}+", bounds[bounds.len() - 1]),
    }
}

/// `AGE_YEARS` over values; Null in, Null out.
pub fn age_years(dob: &Value, reference: &Value) -> Option<Value> {
    match (dob, reference) {
        (Value::Date(d), Value::Date(r)) => Some(Value::Int(age_on(*d, *r))),
        (Value::Null, _) | (_, Value::Null) => Some(Value::Null),
        _ => None,
    }
}

/// `BUCKET` over a value; Null in, Null out.
pub fn bucket(x: &Value, bounds: &[i64]) -> Option<Value> {
    match x {
        Value::Int(i) => Some(Value::Str(bucket_label(*i, bounds))),
        Value::Null => Some(Value::Null),
        _ => None,
    }
}
