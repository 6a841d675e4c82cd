use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::benchmarking::BenchmarkSummary;
use crate::output::{fmt_f64, Table};

use super::{schema_of, CliError, Envelope, BENCHMARK_SCHEMA};

pub const REPORT_SCHEMA: &str = "fsimlab.report/1";
pub const HISTOGRAM_BINS: usize = 20;

/// Benchmark results of one gate merged across input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub gate: String,
    pub xeb_cycle: Option<f64>,
    pub purity_cycle: Option<f64>,
    /// Summed single-qubit Pauli errors of one cycle.
    pub single_qubit: f64,
    pub xeb_two_qubit: Option<f64>,
    pub purity_two_qubit: Option<f64>,
    /// XEB minus purity two-qubit error.
    pub coherent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub quantity: String,
    /// `HISTOGRAM_BINS + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportSummary {
    pub sources: Vec<SourceFile>,
    pub gates: Vec<GateReport>,
    pub mean_xeb_cycle: Option<f64>,
    pub mean_xeb_two_qubit: Option<f64>,
    pub mean_purity_cycle: Option<f64>,
    pub mean_purity_two_qubit: Option<f64>,
    pub histograms: Vec<Histogram>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Equal-width bins from the smallest to the largest value.
pub fn histogram(quantity: &str, values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Histogram {
            quantity: quantity.into(),
            edges: Vec::new(),
            counts: Vec::new(),
        };
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram {
        quantity: quantity.into(),
        edges,
        counts,
    }
}

/// Merges benchmark summaries by gate label. Every file must carry the
/// benchmark schema; otherwise the offending files are listed in the error.
pub fn report(files: &[PathBuf]) -> Result<ReportSummary, CliError> {
    let mut bad = Vec::new();
    let mut parsed = Vec::new();
    for f in files {
        let (schema, value) = schema_of(f)?;
        if schema.as_deref() != Some(BENCHMARK_SCHEMA) {
            bad.push(format!("{} ({})", f.display(), schema.as_deref().unwrap_or("no schema")));
            continue;
        }
        match serde_json::from_value::<Envelope<Vec<BenchmarkSummary>>>(value) {
            Ok(env) => parsed.push((f.clone(), env)),
            Err(e) => bad.push(format!("{} ({e})", f.display())),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::SchemaMismatch(bad));
    }
    let mut merged: BTreeMap<String, GateReport> = BTreeMap::new();
    let mut sources = Vec::new();
    for (path, env) in parsed {
        sources.push(SourceFile {
            path,
            seed: env.seed,
            config_hash: env.config_hash,
        });
        for s in env.data {
            let sq = s.single_qubit[0] + s.single_qubit[1];
            let r = merged.entry(s.gate.clone()).or_insert_with(|| GateReport {
                gate: s.gate.clone(),
                xeb_cycle: None,
                purity_cycle: None,
                single_qubit: sq,
                xeb_two_qubit: None,
                purity_two_qubit: None,
                coherent: None,
            });
            if let Some(x) = &s.xeb {
                r.xeb_cycle = Some(x.e_p_cycle);
            }
            if let Some(p) = &s.purity {
                r.purity_cycle = Some(p.e_p_cycle);
            }
        }
    }
    let gates: Vec<GateReport> = merged
        .into_values()
        .map(|mut r| {
            r.xeb_two_qubit = r.xeb_cycle.map(|x| x - r.single_qubit);
            r.purity_two_qubit = r.purity_cycle.map(|p| p - r.single_qubit);
            r.coherent = r.xeb_two_qubit.zip(r.purity_two_qubit).map(|(x, p)| x - p);
            r
        })
        .collect();
    let collect = |f: fn(&GateReport) -> Option<f64>| gates.iter().filter_map(f).collect::<Vec<f64>>();
    let xeb = collect(|g| g.xeb_cycle);
    let xeb2 = collect(|g| g.xeb_two_qubit);
    let pur = collect(|g| g.purity_cycle);
    let pur2 = collect(|g| g.purity_two_qubit);
    let mut histograms = Vec::new();
    if !xeb2.is_empty() {
        histograms.push(histogram("xeb_two_qubit", &xeb2, HISTOGRAM_BINS));
    }
    if !pur2.is_empty() {
        histograms.push(histogram("purity_two_qubit", &pur2, HISTOGRAM_BINS));
    }
    Ok(ReportSummary {
        sources,
        mean_xeb_cycle: mean(&xeb),
        mean_xeb_two_qubit: mean(&xeb2),
        mean_purity_cycle: mean(&pur),
        mean_purity_two_qubit: mean(&pur2),
        gates,
        histograms,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl ReportSummary {
    pub fn gate_table(&self) -> Table {
        let mut t = Table::new([
            "gate",
            "xeb_cycle",
            "purity_cycle",
            "single_qubit",
            "xeb_two_qubit",
            "purity_two_qubit",
            "coherent",
        ]);
        for g in &self.gates {
            t.push(vec![
                g.gate.clone(),
                opt(g.xeb_cycle),
                opt(g.purity_cycle),
                fmt_f64(g.single_qubit),
                opt(g.xeb_two_qubit),
                opt(g.purity_two_qubit),
                opt(g.coherent),
            ]);
        }
        t
    }

    pub fn histogram_table(&self) -> Table {
        let mut t = Table::new(["quantity", "bin_lo", "bin_hi", "count"]);
        for h in &self.histograms {
            for (k, c) in h.counts.iter().enumerate() {
                t.push(vec![h.quantity.clone(), fmt_f64(h.edges[k]), fmt_f64(h.edges[k + 1]), c.to_string()]);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_every_value() {
        let v: Vec<f64> = (0..57).map(|k| (k as f64 * 0.37).sin()).collect();
        let h = histogram("x", &v, 20);
        assert_eq!(h.counts.iter().sum::<usize>(), v.len());
        assert_eq!(h.edges.len(), 21);
        assert_eq!(*h.counts.last().unwrap() > 0, true);
    }

    #[test]
    fn constant_values_fall_in_the_first_bin() {
        let h = histogram("x", &[2.0; 4], 5);
        assert_eq!(h.counts, vec![4, 0, 0, 0, 0]);
    }

    #[test]
    fn empty_input_gives_empty_summary() {
        let r = report(&[]).unwrap();
        assert!(r.gates.is_empty() && r.histograms.is_empty() && r.mean_xeb_cycle.is_none());
    }
}
