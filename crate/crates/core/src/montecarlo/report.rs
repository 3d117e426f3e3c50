//! CSV and JSON output for sweeps.
//!
//! Every file carries the resolved experiment configuration: JSON output
//! embeds it under `"config"`, CSV output starts with a single
//! `# config: {...}` comment line ahead of the fixed header row.

use std::io::{self, Write};

use serde::Serialize;

use super::SweepResult;

pub const CURVE_HEADER: [&str; 5] = [
    "snr_db",
    "outage_rate_optimized",
    "outage_rate_equal_time",
    "avg_active_optimized",
    "avg_active_equal_time",
];

/// Formats with 9 significant digits in plain decimal notation.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&magnitude) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn to_io(e: impl std::error::Error + Send + Sync + 'static) -> io::Error {
    io::Error::other(e)
}

/// Writes `# config: ...`, a header row, then rows of optional numbers
/// (`None` becomes an empty field).
pub fn write_csv_table<W: Write>(
    mut out: W,
    config: &impl Serialize,
    header: &[&str],
    rows: &[Vec<Option<f64>>],
) -> io::Result<()> {
    let config = serde_json::to_string(config).map_err(to_io)?;
    writeln!(out, "# config: {config}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(to_io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.map(format_sig9).unwrap_or_default()))
            .map_err(to_io)?;
    }
    w.flush()
}

/// One row per SNR point with the columns of [`CURVE_HEADER`].
pub fn write_sweep_csv<W: Write>(out: W, config: &impl Serialize, result: &SweepResult) -> io::Result<()> {
    let snr_db = result
        .optimized
        .as_ref()
        .or(result.equal_time.as_ref())
        .map(|c| c.snr_db.clone())
        .unwrap_or_default();
    let rows: Vec<Vec<Option<f64>>> = snr_db
        .iter()
        .enumerate()
        .map(|(s, &db)| {
            let opt = result.optimized.as_ref();
            let eq = result.equal_time.as_ref();
            vec![
                Some(db),
                opt.map(|c| c.outage_rate[s]),
                eq.map(|c| c.outage_rate[s]),
                opt.map(|c| c.avg_active[s]),
                eq.map(|c| c.avg_active[s]),
            ]
        })
        .collect();
    write_csv_table(out, config, &CURVE_HEADER, &rows)
}

#[derive(Serialize)]
struct SweepDocument<'a, C: Serialize> {
    config: &'a C,
    #[serde(flatten)]
    result: &'a SweepResult,
}

/// Full sweep record with the configuration echoed.
pub fn write_sweep_json<W: Write>(out: W, config: &impl Serialize, result: &SweepResult) -> io::Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &SweepDocument { config, result }).map_err(to_io)?;
    writeln!(out)
}
