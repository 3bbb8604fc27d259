use std::io::Write;

use serde::Serialize;

use crate::Result;

/// Evaluation results of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub proxy_a_raw: f64,
    pub proxy_a_rep: f64,
    pub tissue_error_source: f64,
    pub tissue_error_mrai: f64,
    pub tissue_error_target: f64,
    pub n_target_patches: usize,
    pub repeat_index: usize,
}

pub fn write_reports<W: Write>(writer: W, rows: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
