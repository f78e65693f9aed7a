//! CSV and JSON emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const CSV_SCHEMA_LINE: &str = "# schema=1";

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else if x.is_finite() {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// A versioned CSV table with a fixed header.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = String::new();
        text.push_str(CSV_SCHEMA_LINE);
        text.push('\n');
        text.push_str(&header.join(","));
        text.push('\n');
        Self {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "CSV row width");
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes to `path`, or to standard output when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| CliError::io(format!("writing {}", p.display()), e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("writing standard output", e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn floats_round_trip() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20_000 {
            let x = f64::from_bits(rng.gen::<u64>());
            if !x.is_finite() {
                continue;
            }
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(-24.0), "-24");
        assert_eq!(fmt_float(1e-20), "1e-20");
    }

    #[test]
    fn csv_layout() {
        let mut t = Csv::new(&["a", "b"]);
        t.row(&["1".into(), "2".into()]);
        assert_eq!(t.finish(), "# schema=1\na,b\n1,2\n");
    }
}
