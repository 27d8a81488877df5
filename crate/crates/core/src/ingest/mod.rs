//! Recording ingestion: EDF binary files, plain CSV matrices and label
//! manifests, all parsed into the canonical [`Recording`].

mod csv;
mod edf;
mod manifest;

pub use csv::{read_csv_matrix, write_csv_matrix};
pub use edf::read_edf;
pub use manifest::load_manifest;

use ndarray::Array2;
use std::fmt;
use std::io;

/// A raw multi-channel EEG session: `data` is C×T in microvolts.
#[derive(Debug, Clone)]
pub struct Recording {
    pub subject_id: String,
    pub session_id: String,
    /// Class index, `0..n_classes`.
    pub label: usize,
    /// Channel names, one per data row, unique.
    pub channels: Vec<String>,
    pub sample_rate_hz: f64,
    pub data: Array2<f64>,
}

impl Recording {
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Checks the structural invariants: shape consistency, finite values,
    /// positive rate, unique channel names.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.channels.len() != self.data.nrows() {
            return Err(IngestError::Invalid(format!(
                "{} channel names for {} data rows",
                self.channels.len(),
                self.data.nrows()
            )));
        }
        if self.data.ncols() == 0 {
            return Err(IngestError::Invalid("recording has no samples".into()));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(IngestError::Invalid(format!(
                "non-positive sample rate {}",
                self.sample_rate_hz
            )));
        }
        for (i, a) in self.channels.iter().enumerate() {
            for b in &self.channels[i + 1..] {
                if a == b {
                    return Err(IngestError::Invalid(format!("duplicate channel name {a:?}")));
                }
            }
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::Invalid("non-finite sample value".into()));
        }
        Ok(())
    }
}

/// One dataset entry: where the file lives and how it is labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub subject_id: String,
    /// Index into [`Manifest::class_names`].
    pub label: usize,
}

/// The label manifest: declared class names plus one entry per session file.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug)]
pub enum IngestError {
    /// Header field has the wrong size, is non-numeric, or is inconsistent.
    MalformedHeader(String),
    /// Payload shorter than `records × samples × 2` bytes.
    TruncatedData { expected: usize, actual: usize },
    /// Data signals declare different sampling rates.
    HeterogeneousRate,
    /// `dig_max == dig_min`, the physical scaling is undefined.
    DegenerateScaling { signal: usize },
    /// CSV rows do not all have the header's column count.
    RaggedRows { line: usize, expected: usize, got: usize },
    /// CSV cell failed to parse as a number.
    NonNumericCell { line: usize, column: usize },
    EmptyFile,
    /// Manifest line names a label not in the declared class list.
    UnknownLabel(String),
    /// Same file path listed twice in a manifest.
    DuplicatePath(String),
    EmptyManifest,
    /// A structural invariant of [`Recording`] is violated.
    Invalid(String),
    Io(io::Error),
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MalformedHeader(msg) => write!(f, "malformed header: {msg}"),
            Self::TruncatedData { expected, actual } => {
                write!(f, "truncated data: expected {expected} bytes, found {actual}")
            }
            Self::HeterogeneousRate => write!(f, "signals declare differing sampling rates"),
            Self::DegenerateScaling { signal } => {
                write!(f, "signal {signal}: digital min equals digital max")
            }
            Self::RaggedRows { line, expected, got } => {
                write!(f, "line {line}: expected {expected} columns, got {got}")
            }
            Self::NonNumericCell { line, column } => {
                write!(f, "line {line}, column {column}: not a number")
            }
            Self::EmptyFile => write!(f, "file is empty"),
            Self::UnknownLabel(l) => write!(f, "unknown label {l:?}"),
            Self::DuplicatePath(p) => write!(f, "duplicate path {p:?}"),
            Self::EmptyManifest => write!(f, "manifest has no entries"),
            Self::Invalid(msg) => write!(f, "invalid recording: {msg}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for IngestError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for IngestError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}
