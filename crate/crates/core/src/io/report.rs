//! Line-oriented `key=value` reports. Floats are written with 17 significant
//! digits so they parse back to the same bits.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "fedvit-report/1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

impl Report {
    pub fn new(kind: &str) -> Self {
        let mut r = Self::default();
        r.push("schema", REPORT_SCHEMA);
        r.push("kind", kind);
        r
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        self.entries.push((key, value.to_string().replace('\n', " ")));
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, format_f64(value));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("report line {}: missing '='", i + 1)))?;
            entries.push((k.to_string(), v.to_string()));
        }
        let r = Self { entries };
        match r.get("schema") {
            Some(REPORT_SCHEMA) => Ok(r),
            Some(other) => Err(Error::config(format!("unsupported report schema {other}"))),
            None => Err(Error::config("report has no schema line")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let mut r = Report::new("test");
        let vals = [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0];
        for (i, v) in vals.iter().enumerate() {
            r.push_f64(format!("v{i}"), *v);
        }
        let back = Report::parse(&r.render()).unwrap();
        for (i, v) in vals.iter().enumerate() {
            assert_eq!(back.get_f64(&format!("v{i}")).unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(back, r);
    }

    #[test]
    fn schema_required() {
        assert!(Report::parse("a=1\n").is_err());
        assert!(Report::parse("schema=other/9\n").is_err());
    }
}
