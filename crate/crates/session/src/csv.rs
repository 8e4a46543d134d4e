use std::io::{BufRead, Write};

use crate::{Session, SessionError};

/// Writes one row per sample: `t_s` with 6 decimals then each channel in
/// microvolts with 3 decimals. Time is relative to the first block, so
/// dropped samples show up as jumps.
pub fn export_csv(session: &Session, mut out: impl Write) -> Result<(), SessionError> {
    let mut line = String::from("t_s");
    for label in &session.header.channel_labels {
        line.push(',');
        line.push_str(label);
        line.push_str("_uV");
    }
    line.push('\n');
    out.write_all(line.as_bytes())?;
    let fs = f64::from(session.header.fs);
    let origin = session.blocks.first().map_or(0, |b| b.t0_ns);
    for b in &session.blocks {
        let n = b.len();
        let t0 = (b.t0_ns - origin) as f64 / 1e9;
        for i in 0..n {
            line.clear();
            line.push_str(&format!("{:.6}", t0 + i as f64 / fs));
            for c in 0..peeg_ads1299::CHANNELS {
                line.push_str(&format!(",{:.3}", b.data[c * n + i]));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    /// Row-major, one `Vec` per sample including the time column.
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }
}

/// Reads a CSV written by [`export_csv`].
pub fn read_csv(input: impl BufRead) -> Result<CsvTable, SessionError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| SessionError::Malformed("empty CSV".into()))??;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| SessionError::Malformed(format!("CSV row {}: {e}", n + 2)))?;
        if row.len() != columns.len() {
            return Err(SessionError::Malformed(format!(
                "CSV row {} has {} fields, expected {}",
                n + 2,
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(CsvTable { columns, rows })
}
