use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::fmt_float;

pub const ORACLE_HEADER: [&str; 6] = [
    "check",
    "parameters",
    "statistic",
    "value",
    "std_err",
    "pass",
];

/// One line of an oracle check report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub check: String,
    /// `key=value` pairs separated by `;`.
    pub parameters: String,
    pub statistic: String,
    pub value: f64,
    pub std_err: f64,
    pub pass: bool,
}

pub fn write_oracle_csv<W: Write>(rows: &[OracleRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(ORACLE_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.check.as_str(),
            r.parameters.as_str(),
            r.statistic.as_str(),
            &fmt_float(r.value),
            &fmt_float(r.std_err),
            if r.pass { "true" } else { "false" },
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
