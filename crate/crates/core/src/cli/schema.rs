//! Validators for every file the CLI writes.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::oracle::ORACLE_HEADER;
use crate::phase::{WIGNER_HEADER, WISHART_HEADER};

/// Version of the run-manifest layout.
pub const MANIFEST_SCHEMA_VERSION: u64 = 1;

pub const ODE_HEADER: [&str; 3] = ["t", "r", "q"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvSchema {
    WignerCurve,
    WishartCurve,
    Oracle,
    OdePath,
}

#[derive(Clone, Copy)]
enum Field {
    Real,
    Bool,
    Text,
}

impl CsvSchema {
    pub const ALL: [CsvSchema; 4] = [
        CsvSchema::WignerCurve,
        CsvSchema::WishartCurve,
        CsvSchema::Oracle,
        CsvSchema::OdePath,
    ];

    pub fn header(self) -> &'static [&'static str] {
        match self {
            CsvSchema::WignerCurve => &WIGNER_HEADER,
            CsvSchema::WishartCurve => &WISHART_HEADER,
            CsvSchema::Oracle => &ORACLE_HEADER,
            CsvSchema::OdePath => &ODE_HEADER,
        }
    }

    fn fields(self) -> Vec<Field> {
        use Field::*;
        match self {
            CsvSchema::WignerCurve => vec![Real, Real, Real, Real, Real, Real, Bool],
            CsvSchema::WishartCurve => vec![Real; 7],
            CsvSchema::Oracle => vec![Text, Text, Text, Real, Real, Bool],
            CsvSchema::OdePath => vec![Real; 3],
        }
    }

    /// The schema whose header matches the first line of `text`.
    pub fn detect(text: &str) -> Option<CsvSchema> {
        let first = text.lines().next()?;
        Self::ALL
            .into_iter()
            .find(|s| s.header().join(",") == first)
    }

    /// Checks the header and the type of every field; returns the row count.
    pub fn validate(self, text: &str) -> Result<usize> {
        let bad = |m: String| Error::Parameter(format!("{self:?} csv: {m}"));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(self.header().iter().copied()) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let fields = self.fields();
        let mut rows = 0;
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            if record.len() != fields.len() {
                return Err(bad(format!("row {line} has {} fields", record.len())));
            }
            for (value, kind) in record.iter().zip(&fields) {
                let ok = match kind {
                    Field::Real => value.parse::<f64>().is_ok(),
                    Field::Bool => value == "true" || value == "false",
                    Field::Text => !value.is_empty(),
                };
                if !ok {
                    return Err(bad(format!("row {line}: malformed field `{value}`")));
                }
            }
            rows += 1;
        }
        Ok(rows)
    }
}

/// Checks the layout of a run manifest.
pub fn validate_manifest(text: &str) -> Result<()> {
    let bad = |m: &str| Error::Parameter(format!("manifest: {m}"));
    let v: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    if v["schema_version"].as_u64() != Some(MANIFEST_SCHEMA_VERSION) {
        return Err(bad("unknown schema_version"));
    }
    for key in ["tool", "version", "command"] {
        if !v[key].is_string() {
            return Err(bad(&format!("`{key}` must be a string")));
        }
    }
    if !v["config"].is_object() {
        return Err(bad("`config` must be an object"));
    }
    if !v["failures"].is_array() {
        return Err(bad("`failures` must be an array"));
    }
    if !v["wall_time_seconds"].is_number() {
        return Err(bad("`wall_time_seconds` must be a number"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_and_checks_types() {
        let text = "t,r,q\n0.0e0,1.0e-1,2.0e-1\n1.0e0,3.0e-1,NaN\n";
        assert_eq!(CsvSchema::detect(text), Some(CsvSchema::OdePath));
        assert_eq!(CsvSchema::OdePath.validate(text).unwrap(), 2);
        assert!(CsvSchema::OdePath.validate("t,r,q\n1,x,2\n").is_err());
        assert!(CsvSchema::Oracle.validate(text).is_err());
    }
}
