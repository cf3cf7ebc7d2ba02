//! The result document format:
//!
//! ```text
//! <?xml version="1.0" encoding="utf-8"?>
//! <dataset>
//!   <item>
//!     <element>F</element>
//!     <element>184</element>
//!   </item>
//! </dataset>
//! ```
//!
//! Column labels are not part of the document; the gateway sends them in the
//! `X-Columns` header.

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

use crate::exec::ResultSet;
use crate::relstore::Value;

pub const CONTENT_TYPE: &str = "application/xml";
pub const DECLARATION: &str = "<?xml version=\"1.0\" encoding=\"utf-8\"?>";

/// Replaces the five predefined entities and CR. Not idempotent: escaping twice
/// turns `&amp;` into `&amp;amp;`, so callers must escape exactly once.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // Parsers fold a literal CR into LF.
            '\r' => out.push_str("&#13;"),
            // Characters XML 1.0 cannot carry at all.
            c if (c < ' ' && !matches!(c, '\t' | '\n')) || c == '\u{FFFE}' || c == '\u{FFFF}' => {
                out.push('\u{FFFD}')
            }
            c => out.push(c),
        }
    }
    out
}

fn element_text(v: &Value) -> String {
    escape(&v.to_text())
}

pub fn serialize(rs: &ResultSet) -> String {
    let mut out = String::new();
    out.push_str(DECLARATION);
    out.push('\n');
    out.push_str("<dataset>\n");
    for row in &rs.rows {
        out.push_str("  <item>\n");
        for v in row {
            out.push_str("    <element>");
            out.push_str(&element_text(v));
            out.push_str("</element>\n");
        }
        out.push_str("  </item>\n");
    }
    out.push_str("</dataset>\n");
    out
}

/// Bytes escaped inside one `X-Columns` label. Non-ASCII is always escaped.
const LABEL: &AsciiSet = &CONTROLS.add(b',').add(b'%');

/// The `X-Columns` header value: percent-encoded labels joined by commas.
pub fn columns_header(rs: &ResultSet) -> String {
    rs.columns
        .iter()
        .map(|c| utf8_percent_encode(&c.label, LABEL).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Inverse of [`columns_header`].
pub fn parse_columns_header(value: &str) -> Vec<String> {
    if value.is_empty() {
        return Vec::new();
    }
    value
        .split(',')
        .map(|l| percent_decode_str(l).decode_utf8_lossy().into_owned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping() {
        assert_eq!(escape("a&b"), "a&amp;b");
        assert_eq!(escape("plain"), "plain");
        assert_eq!(escape("<"), "&lt;");
        assert_eq!(
            escape("Crohn's <disease> & co"),
            "Crohn&apos;s &lt;disease&gt; &amp; co"
        );
        assert_eq!(escape("\"q\""), "&quot;q&quot;");
        assert_eq!(escape("a\u{1}b"), "a\u{FFFD}b");
        assert_eq!(escape("&amp;"), "&amp;amp;");
        assert_eq!(escape("a\r\nb"), "a&#13;\nb");
    }

    #[test]
    fn header_labels_survive_commas() {
        use crate::exec::ResultColumn;
        use crate::relstore::ScalarType;
        let rs = ResultSet {
            columns: ["BUCKET(x, 18, 40)", "n%", "Größe"]
                .into_iter()
                .map(|l| ResultColumn {
                    label: l.into(),
                    dtype: ScalarType::Int,
                })
                .collect(),
            rows: Vec::new(),
            group_sizes: Vec::new(),
        };
        let h = columns_header(&rs);
        assert!(h.is_ascii());
        assert_eq!(h.matches(',').count(), 2);
        assert_eq!(parse_columns_header(&h), rs.labels());
    }
}
