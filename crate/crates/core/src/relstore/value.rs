use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// A calendar day. Ordered lexicographically on (year, month, day).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Date {
    year: i32,
    month: u32,
    day: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid date `{0}`: expected YYYY-MM-DD or YYYY-M-D naming a real calendar day")]
pub struct DateParseError(pub String);

impl Date {
    /// Builds a date, rejecting anything that is not a real proleptic Gregorian day.
    pub fn new(year: i32, month: u32, day: u32) -> Option<Date> {
        NaiveDate::from_ymd_opt(year, month, day)?;
        Some(Date { year, month, day })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    /// Days since 0001-01-01 (CE day 1 is 1).
    pub fn ordinal(&self) -> i32 {
        self.naive().num_days_from_ce()
    }

    pub fn from_ordinal(days: i32) -> Option<Date> {
        let d = NaiveDate::from_num_days_from_ce_opt(days)?;
        Some(Date {
            year: d.year(),
            month: d.month(),
            day: d.day(),
        })
    }

    fn naive(&self) -> NaiveDate {
        // Constructor guarantees validity.
        NaiveDate::from_ymd_opt(self.year, self.month, self.day).expect("validated date")
    }
}

impl FromStr for Date {
    type Err = DateParseError;

    /// Accepts `YYYY-MM-DD` and the non-padded `YYYY-M-D`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DateParseError(s.to_string());
        let mut parts = s.split('-');
        let (y, m, d) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(y), Some(m), Some(d), None) => (y, m, d),
            _ => return Err(err()),
        };
        let digits = |p: &str, max_len: usize| {
            !p.is_empty() && p.len() <= max_len && p.bytes().all(|b| b.is_ascii_digit())
        };
        if y.len() != 4 || !digits(y, 4) || !digits(m, 2) || !digits(d, 2) {
            return Err(err());
        }
        let year = y.parse().map_err(|_| err())?;
        let month = m.parse().map_err(|_| err())?;
        let day = d.parse().map_err(|_| err())?;
        Date::new(year, month, day).ok_or_else(err)
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// Column types. Enum columns hold `Value::Str` restricted to the listed values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataType {
    Int,
    Str,
    Date,
    Bool,
    Enum(Vec<String>),
}

/// The scalar kind a value of some column type carries, with enums collapsed to strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    Int,
    Str,
    Date,
    Bool,
}

impl DataType {
    pub fn scalar(&self) -> ScalarType {
        match self {
            DataType::Int => ScalarType::Int,
            DataType::Str | DataType::Enum(_) => ScalarType::Str,
            DataType::Date => ScalarType::Date,
            DataType::Bool => ScalarType::Bool,
        }
    }

    /// Parses a textual field into a value of this type. Empty text is not handled here.
    pub fn parse_text(&self, text: &str) -> Result<Value, String> {
        match self {
            DataType::Int => text
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|_| format!("`{text}` is not a decimal integer")),
            DataType::Str => Ok(Value::Str(text.to_string())),
            DataType::Date => text.parse::<Date>().map(Value::Date).map_err(|e| e.to_string()),
            DataType::Bool => match text {
                "1" => Ok(Value::Bool(true)),
                "0" => Ok(Value::Bool(false)),
                t if t.eq_ignore_ascii_case("true") => Ok(Value::Bool(true)),
                t if t.eq_ignore_ascii_case("false") => Ok(Value::Bool(false)),
                _ => Err(format!("`{text}` is not a boolean (0/1/true/false)")),
            },
            DataType::Enum(values) => {
                if values.iter().any(|v| v == text) {
                    Ok(Value::Str(text.to_string()))
                } else {
                    Err(format!("`{text}` is not one of {values:?}"))
                }
            }
        }
    }

    /// Whether `value` may be stored in a column of this type (Null handled by the caller).
    pub fn admits(&self, value: &Value) -> bool {
        match (self, value) {
            (DataType::Int, Value::Int(_))
            | (DataType::Str, Value::Str(_))
            | (DataType::Date, Value::Date(_))
            | (DataType::Bool, Value::Bool(_)) => true,
            (DataType::Enum(values), Value::Str(s)) => values.iter().any(|v| v == s),
            _ => false,
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarType::Int => "int",
            ScalarType::Str => "str",
            ScalarType::Date => "date",
            ScalarType::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Str(String),
    Date(Date),
    Bool(bool),
    Null,
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn scalar_type(&self) -> Option<ScalarType> {
        match self {
            Value::Int(_) => Some(ScalarType::Int),
            Value::Str(_) => Some(ScalarType::Str),
            Value::Date(_) => Some(ScalarType::Date),
            Value::Bool(_) => Some(ScalarType::Bool),
            Value::Null => None,
        }
    }

    /// Compares two non-null values of the same scalar type; `None` otherwise.
    pub fn try_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Date(a), Value::Date(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Total order used for sorting output columns: Null sorts first, then by value.
    /// Mixed types fall back to a fixed kind order.
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Null => 0,
                Value::Bool(_) => 1,
                Value::Int(_) => 2,
                Value::Date(_) => 3,
                Value::Str(_) => 4,
            }
        }
        self.try_cmp(other)
            .unwrap_or_else(|| rank(self).cmp(&rank(other)))
    }

    /// Text form used by CSV and XML output. Null renders as the empty string.
    pub fn to_text(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Str(s) => s.clone(),
            Value::Date(d) => d.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Null => String::new(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            other => f.write_str(&other.to_text()),
        }
    }
}
