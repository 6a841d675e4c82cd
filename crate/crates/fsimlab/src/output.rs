//! Tabular result export.

use serde::{Deserialize, Serialize};
use std::io::Write;

/// Seed and configuration hash stamped into every output row.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            seed,
            config_hash: config_hash.into(),
        }
    }
}

/// A header plus rows of already formatted fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// RFC-4180 CSV with `seed` and `config_hash` columns appended.
    pub fn write_csv<W: Write>(&self, w: W, prov: &Provenance) -> Result<(), csv::Error> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        let mut header = self.header.clone();
        header.push("seed".into());
        header.push("config_hash".into());
        out.write_record(&header)?;
        let seed = prov.seed.to_string();
        for row in &self.rows {
            out.write_record(row.iter().map(String::as_str).chain([seed.as_str(), prov.config_hash.as_str()]))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, prov: &Provenance) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, prov).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_provenance_columns() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        let s = t.to_csv_string(&Provenance::new(5, "abc"));
        assert_eq!(s, "a,b,seed,config_hash\r\n1,\"x,y\",5,abc\r\n");
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1e-300, -3.25, 1.0 / 3.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
