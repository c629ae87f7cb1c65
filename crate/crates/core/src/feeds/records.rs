//! Line-delimited JSON feed records.

use std::io::{BufRead, Write};

use super::SourceReport;
use crate::error::{Error, Result};

pub fn write_reports<W: Write>(mut out: W, reports: &[SourceReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_reports<R: BufRead>(input: R) -> Result<Vec<SourceReport>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: SourceReport = serde_json::from_str(&line)
            .map_err(|e| Error::ScenarioParse(format!("feed record line {}: {e}", i + 1)))?;
        out.push(r);
    }
    Ok(out)
}
