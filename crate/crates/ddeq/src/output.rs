//! CSV and JSON writers. Every file starts with the hash of the config
//! that produced it: a `# config_hash: …` comment line for CSV, a
//! `config_hash` field for JSON.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Decimal rendering with 9 significant digits; scientific notation only
/// for very small or very large magnitudes.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

pub fn opt_sig9(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

pub struct CsvWriter {
    inner: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, config_hash: &str, header: &[&str]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut inner = BufWriter::new(file);
        writeln!(inner, "# config_hash: {config_hash}")?;
        writeln!(inner, "{}", header.join(","))?;
        Ok(Self { inner })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        let mut first = true;
        for f in fields {
            if !first {
                self.inner.write_all(b",")?;
            }
            self.inner.write_all(f.as_ref().as_bytes())?;
            first = false;
        }
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn raw(&mut self) -> &mut BufWriter<File> {
        &mut self.inner
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, config_hash: &str, body: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&Stamped { config_hash, body })?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(2.0 / 3.0 * 100.0), "66.6666667");
        assert_eq!(sig9(0.5), "0.500000000");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(-0.00123456789), "-0.00123456789");
        assert_eq!(sig9(1.5e-9), "1.50000000e-9");
    }

    #[test]
    fn sig9_round_trips_to_nine_digits() {
        for x in [0.123456789123, 7.77777777777, 0.000314159265358] {
            let y: f64 = sig9(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-8);
        }
    }
}
