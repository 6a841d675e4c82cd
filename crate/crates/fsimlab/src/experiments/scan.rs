use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::output::{fmt_f64, Provenance, Table};

/// What a scan pixel reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Leakage population after preparing |11⟩.
    Leakage,
    /// Conditional phase (degrees).
    Phi,
    /// Swap angle (degrees).
    Theta,
    /// A raw population.
    Population,
}

impl std::fmt::Display for ScanMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScanMode::Leakage => "leakage",
            ScanMode::Phi => "phi",
            ScanMode::Theta => "theta",
            ScanMode::Population => "population",
        })
    }
}

/// A two-axis grid of measurements, `values[ix * y.len() + iy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub mode: ScanMode,
    pub x_label: String,
    pub x: Vec<f64>,
    pub y_label: String,
    pub y: Vec<f64>,
    /// Coupling (MHz) at each `y`, when `y` is a coupler bias.
    pub y_coupling_mhz: Option<Vec<f64>>,
    pub values: Vec<f64>,
}

impl ScanResult {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.y.len() + iy]
    }

    /// All pixels with the given `x` index, in `y` order.
    pub fn column(&self, ix: usize) -> &[f64] {
        let n = self.y.len();
        &self.values[ix * n..(ix + 1) * n]
    }

    pub fn count_below(&self, threshold: f64) -> usize {
        self.values.iter().filter(|v| **v < threshold).count()
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec![self.x_label.clone(), self.y_label.clone()];
        if self.y_coupling_mhz.is_some() {
            header.push("g_mhz".into());
        }
        header.push(self.mode.to_string());
        let mut t = Table::new(header);
        for (ix, x) in self.x.iter().enumerate() {
            for (iy, y) in self.y.iter().enumerate() {
                let mut row = vec![fmt_f64(*x), fmt_f64(*y)];
                if let Some(g) = &self.y_coupling_mhz {
                    row.push(fmt_f64(g[iy]));
                }
                row.push(fmt_f64(self.value(ix, iy)));
                t.push(row);
            }
        }
        t
    }

    pub fn write_csv<W: Write>(&self, w: W, prov: &Provenance) -> Result<(), csv::Error> {
        self.to_table().write_csv(w, prov)
    }
}
