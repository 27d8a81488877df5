#![allow(dead_code)]

//! Shared fixtures for the integration suites: a byte-level EDF writer kept
//! deliberately independent of the library's parser, and synthetic EEG
//! session generators.

use neuroband::rng::Xoshiro256;
use std::io::Write;
use std::path::Path;

pub struct EdfSignalFixture {
    pub label: String,
    pub phys_min: f64,
    pub phys_max: f64,
    pub dig_min: i32,
    pub dig_max: i32,
    pub samples_per_record: usize,
    /// Length must be `records * samples_per_record`.
    pub samples: Vec<i16>,
}

/// Writes an EDF file byte by byte from the format definition: 256-byte main
/// header, ns×256 signal header block with field-major layout, then
/// record-interleaved 16-bit little-endian samples.
pub fn write_edf(
    path: &Path,
    records: usize,
    record_duration_s: f64,
    signals: &[EdfSignalFixture],
) -> std::io::Result<()> {
    fn field(out: &mut Vec<u8>, text: &str, width: usize) {
        let mut bytes = text.as_bytes().to_vec();
        assert!(bytes.len() <= width, "field {text:?} exceeds {width} bytes");
        bytes.resize(width, b' ');
        out.extend_from_slice(&bytes);
    }

    let ns = signals.len();
    let mut header = Vec::with_capacity(256 + 256 * ns);
    field(&mut header, "0", 8);
    field(&mut header, "fixture patient", 80);
    field(&mut header, "fixture recording", 80);
    field(&mut header, "02.01.06", 8);
    field(&mut header, "10.30.00", 8);
    field(&mut header, &format!("{}", 256 + 256 * ns), 8);
    field(&mut header, "", 44);
    field(&mut header, &format!("{records}"), 8);
    field(&mut header, &format!("{record_duration_s}"), 8);
    field(&mut header, &format!("{ns}"), 4);

    for s in signals {
        field(&mut header, &s.label, 16);
    }
    for _ in signals {
        field(&mut header, "AgAgCl electrode", 80);
    }
    for _ in signals {
        field(&mut header, "uV", 8);
    }
    for s in signals {
        field(&mut header, &format!("{}", s.phys_min), 8);
    }
    for s in signals {
        field(&mut header, &format!("{}", s.phys_max), 8);
    }
    for s in signals {
        field(&mut header, &format!("{}", s.dig_min), 8);
    }
    for s in signals {
        field(&mut header, &format!("{}", s.dig_max), 8);
    }
    for _ in signals {
        field(&mut header, "HP:0.1Hz LP:75Hz", 80);
    }
    for s in signals {
        field(&mut header, &format!("{}", s.samples_per_record), 8);
    }
    for _ in signals {
        field(&mut header, "", 32);
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&header)?;
    for rec in 0..records {
        for s in signals {
            let start = rec * s.samples_per_record;
            for k in 0..s.samples_per_record {
                out.write_all(&s.samples[start + k].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Digital sample stream for a sine at `freq` Hz quantized into the given
/// digital range, assuming the physical range is symmetric around zero.
pub fn quantized_tone(
    freq: f64,
    fs: f64,
    n: usize,
    amplitude_fraction: f64,
    dig_max: i32,
) -> Vec<i16> {
    (0..n)
        .map(|i| {
            let v = amplitude_fraction * (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin();
            (v * dig_max as f64).round() as i16
        })
        .collect()
}

/// One synthetic EEG session: a dominant tone per class plus Gaussian noise
/// at the requested SNR, multiple channels, written as a CSV matrix.
pub fn write_synthetic_session_csv(
    path: &Path,
    dominant_freq_hz: f64,
    snr_db: f64,
    channels: usize,
    seconds: f64,
    fs: f64,
    rng: &mut Xoshiro256,
) -> std::io::Result<()> {
    let n = (seconds * fs) as usize;
    let tone_power = 0.5; // unit amplitude sine
    let noise_sigma = (tone_power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let headers: Vec<String> = (0..channels).map(|c| format!("ch{c}")).collect();
    writeln!(out, "{}", headers.join(","))?;
    // per-channel random phase so channels are not identical
    let phases: Vec<f64> =
        (0..channels).map(|_| 2.0 * std::f64::consts::PI * rng.next_f64()).collect();
    for i in 0..n {
        let t = i as f64 / fs;
        let mut cells = Vec::with_capacity(channels);
        for c in 0..channels {
            let v = (2.0 * std::f64::consts::PI * dominant_freq_hz * t + phases[c]).sin()
                + noise_sigma * rng.next_gaussian();
            cells.push(format!("{v}"));
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Builds a two-class synthetic dataset (class 0 dominant at `freq0`, class 1
/// at `freq1`) and its manifest. Returns the manifest path.
#[allow(clippy::too_many_arguments)]
pub fn write_synthetic_dataset(
    dir: &Path,
    n_subjects: usize,
    freq0: f64,
    freq1: f64,
    snr_db: f64,
    channels: usize,
    seconds: f64,
    fs: f64,
    seed: u64,
) -> std::io::Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut rng = Xoshiro256::seed_from(seed);
    let mut manifest = String::from("tone10,tone6\n");
    for i in 0..n_subjects {
        let class = i % 2;
        let freq = if class == 0 { freq0 } else { freq1 };
        let file = format!("subj{i:03}.csv");
        write_synthetic_session_csv(
            &dir.join(&file),
            freq,
            snr_db,
            channels,
            seconds,
            fs,
            &mut rng,
        )?;
        let label = if class == 0 { "tone10" } else { "tone6" };
        manifest.push_str(&format!("{file},subj{i:03},{label}\n"));
    }
    let manifest_path = dir.join("manifest.txt");
    std::fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}
