//! Plain CSV matrix format: header row of channel names, then one row per
//! time point. The escape hatch for anything that is not EDF.

use super::{IngestError, Recording};
use ndarray::Array2;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Reads a CSV matrix into a [`Recording`] (data transposed to C×T).
/// Subject/label metadata are the caller's job.
pub fn read_csv_matrix<P: AsRef<Path>>(path: P, sample_rate_hz: f64) -> Result<Recording, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let session_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv_matrix(&text, sample_rate_hz, session_id)
}

fn parse_csv_matrix(
    text: &str,
    sample_rate_hz: f64,
    session_id: String,
) -> Result<Recording, IngestError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(IngestError::EmptyFile)?;
    let channels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let c = channels.len();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_idx, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != c {
            return Err(IngestError::RaggedRows {
                line: line_idx + 1,
                expected: c,
                got: cells.len(),
            });
        }
        let mut row = Vec::with_capacity(c);
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| IngestError::NonNumericCell {
                line: line_idx + 1,
                column: col + 1,
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }

    let t = rows.len();
    let mut data = Array2::<f64>::zeros((c, t));
    for (ti, row) in rows.iter().enumerate() {
        for (ci, &v) in row.iter().enumerate() {
            data[[ci, ti]] = v;
        }
    }

    let rec = Recording {
        subject_id: String::new(),
        session_id,
        label: 0,
        channels,
        sample_rate_hz,
        data,
    };
    rec.validate()?;
    Ok(rec)
}

/// Writes a recording back out in the same layout (header of channel names,
/// one row per time point). Values use shortest-round-trip formatting, so
/// `read(write(rec))` is value-exact.
pub fn write_csv_matrix<P: AsRef<Path>>(path: P, rec: &Recording) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", rec.channels.join(","))?;
    for t in 0..rec.n_samples() {
        let mut line = String::new();
        for ch in 0..rec.n_channels() {
            if ch > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", rec.data[[ch, t]]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
