//! Deterministic output plumbing: tables rendered as CSV (with a
//! `#`-prefixed metadata header) or versioned JSON, plus the run manifest
//! that records what produced an output and its content digest.
//!
//! Determinism contract: rendering depends only on the pushed cells, so a
//! repeated run with the same inputs produces byte-identical files. The
//! manifest's wall-time field is informational and never enters the digest.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use crate::precision::Enclosure;

/// Bumped whenever a column set or JSON field layout changes shape.
pub const SCHEMA_VERSION: &str = "1";

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Render an enclosure as a (value, err) cell pair at a bounded display
/// scale. Truncating the scale goes through [`Enclosure::rescale`], which
/// widens `err` by the rounding it introduces, so the printed pair still
/// encloses the target quantity.
pub fn enclosure_cells(e: &Enclosure, display_scale: u32) -> (String, String) {
    let e = e.rescale(display_scale.min(e.scale()));
    (e.value.to_decimal_string(), e.err.to_decimal_string())
}

/// A named table with fixed columns: the unit of CSV/JSON output.
///
/// Cells are pre-rendered strings; integers print bare, real quantities are
/// pushed as adjacent value/err column pairs by the caller.
#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    columns: Vec<String>,
    meta: Vec<(String, String)>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            meta: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row arity mismatch for table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# kfree {} table={} schema_version={}",
            tool_version(),
            self.name,
            SCHEMA_VERSION
        );
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let meta: serde_json::Map<String, Value> = self
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        json!({
            "schema_version": SCHEMA_VERSION,
            "tool_version": tool_version(),
            "table": self.name,
            "meta": meta,
            "columns": self.columns,
            "rows": self.rows,
        })
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            // serde_json maps are sorted, Values render without whitespace
            // surprises: the byte stream is a pure function of the cells
            OutputFormat::Json => format!("{:#}\n", self.to_json()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// Provenance record for one CLI invocation. The digest covers the rendered
/// output bytes only; wall time is recorded but deliberately outside it, so
/// reruns of the same command agree on `output_digest` byte for byte.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Vec<(String, String)>,
    pub tool_version: String,
    pub precision_digits: u32,
    pub workers: usize,
    pub wall_ms: u128,
    pub output_digest: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, precision_digits: u32, workers: usize) -> Self {
        RunManifest {
            command: command.into(),
            parameters: Vec::new(),
            tool_version: tool_version().to_string(),
            precision_digits,
            workers,
            wall_ms: 0,
            output_digest: String::new(),
        }
    }

    pub fn param(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.parameters.push((key.into(), value.to_string()));
        self
    }

    /// Seal the manifest against the bytes that were (or will be) written.
    pub fn finish(&mut self, output: &str, wall: std::time::Duration) {
        self.output_digest = format!("sha256:{}", sha256_hex(output.as_bytes()));
        self.wall_ms = wall.as_millis();
    }

    pub fn to_json(&self) -> Value {
        let params: serde_json::Map<String, Value> = self
            .parameters
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "parameters": params,
            "tool_version": self.tool_version,
            "precision_digits": self.precision_digits,
            "workers": self.workers,
            "wall_ms": self.wall_ms,
            "output_digest": self.output_digest,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::Dec;

    #[test]
    fn sha256_matches_reference_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn csv_layout_is_exact() {
        let mut t = Table::new("demo", &["x", "count"]);
        t.push_meta("k", 2);
        t.push_row(vec!["10".into(), "7".into()]);
        t.push_row(vec!["100".into(), "61".into()]);
        let expected = format!(
            "# kfree {} table=demo schema_version=1\n# k=2\nx,count\n10,7\n100,61\n",
            tool_version()
        );
        assert_eq!(t.to_csv(), expected);
    }

    #[test]
    fn json_has_versioned_schema_and_rows() {
        let mut t = Table::new("demo", &["a"]);
        t.push_meta("q", 5);
        t.push_row(vec!["1".into()]);
        let v = t.to_json();
        assert_eq!(v["schema_version"], "1");
        assert_eq!(v["table"], "demo");
        assert_eq!(v["meta"]["q"], "5");
        assert_eq!(v["columns"][0], "a");
        assert_eq!(v["rows"][0][0], "1");
    }

    #[test]
    #[should_panic(expected = "row arity mismatch")]
    fn row_arity_is_enforced() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push_row(vec!["1".into()]);
    }

    #[test]
    fn rendering_is_reproducible() {
        let build = || {
            let mut t = Table::new("demo", &["n", "v", "v_err"]);
            t.push_meta("tol", "1e-9");
            let e = Enclosure::from_ratio(1, 3, 30);
            let (v, err) = enclosure_cells(&e, 20);
            t.push_row(vec!["1".into(), v, err]);
            t
        };
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            assert_eq!(build().render(format), build().render(format));
        }
    }

    #[test]
    fn enclosure_cells_truncate_with_widened_err() {
        let e = Enclosure::from_ratio(1, 3, 40);
        let (v, err) = enclosure_cells(&e, 12);
        assert_eq!(v, "0.333333333333");
        // the printed err must absorb both the original enclosure error and
        // the truncation of the value to 12 digits
        let printed: f64 = err.parse().unwrap();
        assert!(printed > 0.0 && printed < 1e-10, "err cell {err}");
        // a wider display scale than the stored scale is a no-op
        let (v40, _) = enclosure_cells(&e, 80);
        assert_eq!(v40.len(), 2 + 40);
    }

    #[test]
    fn manifest_digest_ignores_wall_time() {
        let output = "col\n1\n";
        let mut a = RunManifest::new("sieve", 50, 1).param("k", 2);
        let mut b = RunManifest::new("sieve", 50, 1).param("k", 2);
        a.finish(output, std::time::Duration::from_millis(5));
        b.finish(output, std::time::Duration::from_millis(900));
        assert_eq!(a.output_digest, b.output_digest);
        assert_ne!(a.wall_ms, b.wall_ms);
        assert!(a.output_digest.starts_with("sha256:"));
        let j = a.to_json();
        assert_eq!(j["schema_version"], "1");
        assert_eq!(j["parameters"]["k"], "2");
        assert_eq!(j["workers"], 1);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }

    #[test]
    fn dec_cells_match_display() {
        let d = Dec::from_ratio(22, 7, 15);
        assert_eq!(d.to_decimal_string(), "3.142857142857143");
    }
}
