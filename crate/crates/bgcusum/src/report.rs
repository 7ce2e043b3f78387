//! Long-format CSV: one row per (experiment, metric).

use std::io::Write;

use crate::error::Result;
use crate::evaluation::MonteCarloReport;

pub const HEADER: [&str; 9] = [
    "experiment_id",
    "metric",
    "estimate",
    "se",
    "ci_lo",
    "ci_hi",
    "trials",
    "truncated",
    "seconds",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment_id: String,
    pub report: MonteCarloReport,
}

/// Wall time varies run to run, so `seconds` stays empty unless `timing`.
pub fn write_csv<W: Write>(out: W, rows: &[Row], timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        let r = &row.report;
        let seconds = if timing { r.seconds.to_string() } else { String::new() };
        w.write_record([
            row.experiment_id.as_str(),
            r.metric.as_str(),
            &r.estimate.to_string(),
            &r.se.to_string(),
            &r.ci_lo.to_string(),
            &r.ci_hi.to_string(),
            &r.trials.to_string(),
            &r.truncated.to_string(),
            &seconds,
        ])?;
    }
    w.flush().map_err(|e| crate::error::Error::io("<csv output>", e))?;
    Ok(())
}
