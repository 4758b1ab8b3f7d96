//! Plot data: comma-separated columns `x, lhs, lhs_stderr, rhs`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::checks::PlotRow;
use super::report::RunReport;

pub const HEADER: [&str; 4] = ["x", "lhs", "lhs_stderr", "rhs"];

/// CSV text for the check named `name`. Floats use the shortest
/// representation that parses back to the same value.
pub fn emit_plotdata(report: &RunReport, name: &str) -> Result<String> {
    let check = report.check(name).ok_or_else(|| {
        let known: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        Error::Domain(format!("unknown check `{name}`; report has: {}", known.join(", ")))
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).map_err(|e| Error::Io(e.to_string()))?;
    for r in &check.table {
        w.write_record([r.x, r.lhs, r.lhs_stderr, r.rhs].map(|v| v.to_string())).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parse plot data produced by [`emit_plotdata`].
pub fn parse_plotdata(text: &str) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Io(e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(Error::Domain(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
            let f = |i: usize| rec[i].parse::<f64>().map_err(|e| Error::Domain(e.to_string()));
            Ok(PlotRow {
                x: f(0)?,
                lhs: f(1)?,
                lhs_stderr: f(2)?,
                rhs: f(3)?,
            })
        })
        .collect()
}

/// File-system-safe stem for a check name.
pub fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Write one CSV per check into `dir`.
pub fn write_all_plotdata(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    report
        .checks
        .iter()
        .filter(|c| !c.table.is_empty())
        .map(|c| {
            let path = dir.join(format!("{}.csv", file_stem(&c.name)));
            std::fs::write(&path, emit_plotdata(report, &c.name)?)?;
            Ok(path)
        })
        .collect()
}
