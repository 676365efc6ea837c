//! Signal files: raw little-endian complex binary or `index,re,im` CSV.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use detsft_core::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SignalFormat {
    /// Text, one `index,re,im` row per sample.
    Csv,
    /// Interleaved little-endian `f64` pairs.
    C128,
    /// Interleaved little-endian `f32` pairs.
    C64,
}

impl SignalFormat {
    /// `.csv` is CSV, `.c64` is single precision, anything else is double.
    pub fn sniff(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            Some(e) if e.eq_ignore_ascii_case("c64") => Self::C64,
            _ => Self::C128,
        }
    }
}

pub fn read_signal(path: &Path, format: Option<SignalFormat>) -> Result<Vec<Complex64>> {
    let format = format.unwrap_or_else(|| SignalFormat::sniff(path));
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match format {
        SignalFormat::Csv => parse_csv(&String::from_utf8(bytes).context("CSV is not UTF-8")?),
        SignalFormat::C128 => {
            if bytes.len() % 16 != 0 {
                bail!("binary length {} is not a multiple of 16", bytes.len());
            }
            Ok(bytes
                .chunks_exact(16)
                .map(|c| {
                    let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                    let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                    Complex64::new(re, im)
                })
                .collect())
        }
        SignalFormat::C64 => {
            if bytes.len() % 8 != 0 {
                bail!("binary length {} is not a multiple of 8", bytes.len());
            }
            Ok(bytes
                .chunks_exact(8)
                .map(|c| {
                    let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                    let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                    Complex64::new(re as f64, im as f64)
                })
                .collect())
        }
    }
}

fn parse_csv(text: &str) -> Result<Vec<Complex64>> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            bail!("line {}: expected index,re,im", line_no + 1);
        }
        let Ok(index) = fields[0].parse::<usize>() else {
            // Tolerate a column-name row.
            if rows.is_empty() {
                continue;
            }
            bail!("line {}: bad index {:?}", line_no + 1, fields[0]);
        };
        let re: f64 = fields[1]
            .parse()
            .with_context(|| format!("line {}: bad real part", line_no + 1))?;
        let im: f64 = fields[2]
            .parse()
            .with_context(|| format!("line {}: bad imaginary part", line_no + 1))?;
        rows.push((index, Complex64::new(re, im)));
    }
    rows.sort_by_key(|r| r.0);
    for (expect, &(index, _)) in rows.iter().enumerate() {
        if index != expect {
            bail!("CSV indices must cover 0..n exactly once (missing or repeated {expect})");
        }
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

pub fn write_signal(path: &Path, signal: &[Complex64], format: Option<SignalFormat>) -> Result<()> {
    let format = format.unwrap_or_else(|| SignalFormat::sniff(path));
    let bytes = match format {
        SignalFormat::Csv => {
            let mut s = String::from("index,re,im\n");
            for (i, v) in signal.iter().enumerate() {
                s.push_str(&format!("{i},{},{}\n", v.re, v.im));
            }
            s.into_bytes()
        }
        SignalFormat::C128 => signal
            .iter()
            .flat_map(|v| [v.re.to_le_bytes(), v.im.to_le_bytes()].concat())
            .collect(),
        SignalFormat::C64 => signal
            .iter()
            .flat_map(|v| [(v.re as f32).to_le_bytes(), (v.im as f32).to_le_bytes()].concat())
            .collect(),
    };
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x: Vec<Complex64> = (0..5)
            .map(|i| Complex64::new(i as f64 * 0.25, -(i as f64)))
            .collect();
        for name in ["a.csv", "a.bin", "a.c64"] {
            let p = dir.path().join(name);
            write_signal(&p, &x, None).unwrap();
            assert_eq!(read_signal(&p, None).unwrap(), x, "{name}");
        }
    }

    #[test]
    fn csv_gaps_are_rejected() {
        assert!(parse_csv("0,1,0\n2,1,0\n").is_err());
        assert_eq!(parse_csv("1,0,2\n0,1,0\n").unwrap().len(), 2);
    }
}
