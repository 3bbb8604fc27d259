use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiments::REFERENCE_FOOTER;
use crate::{MraiError, Result};

const TABLES: [(&str, &str); 5] = [
    ("exp1_summary.csv", "Experiment 1: one target patch per tissue"),
    ("exp2_curve.csv", "Experiment 2: learning curve"),
    ("exp3_sweep.csv", "Experiment 3: network size sweep"),
    ("exp4_margins.csv", "Experiment 4: margin sweep"),
    ("exp1_records.csv", "Experiment 1 runs"),
];

fn markdown_table(path: &Path) -> Result<String> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut md = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
    for row in reader.records() {
        let row = row?;
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c.parse::<f64>() {
                Ok(v) if c.contains('.') => format!("{v:.4}"),
                _ => c.to_string(),
            })
            .collect();
        let _ = writeln!(md, "| {} |", cells.join(" | "));
    }
    Ok(md)
}

/// Collect the result tables found in `dir` into one markdown report,
/// written to `dir/report.md` and returned.
pub fn build_report(dir: &Path) -> Result<String> {
    let mut md = String::from("# Results\n");
    let mut found = 0;
    for (file, title) in TABLES {
        let path = dir.join(file);
        if path.exists() {
            found += 1;
            let _ = writeln!(md, "\n## {title}\n\n{}", markdown_table(&path)?);
        }
    }
    if found == 0 {
        return Err(MraiError::InvalidArgument(format!("no result tables in {}", dir.display())));
    }
    let _ = writeln!(md, "\n{REFERENCE_FOOTER}");
    fs::write(dir.join("report.md"), &md)?;
    Ok(md)
}
