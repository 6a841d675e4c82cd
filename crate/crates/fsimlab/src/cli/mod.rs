//! The `fsimlab` command line: configuration, dispatch to the experiment,
//! benchmarking and calibration modules, and artifact export.

mod config;
mod report;

pub use config::*;
pub use report::*;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use crate::benchmarking::{
    default_depths, ex_situ_optimize, fsim_channel, generate_xeb_circuits, measure_circuits, purity_benchmark, run_xeb,
    single_qubit_rb, with_depolarizing, analyze_xeb, BenchmarkError, BenchmarkSummary, PHASES,
};
use crate::calibration::{
    calibrate_composite_fsim, calibrate_cphase_family, calibrate_iswap_family, fsim_grid_525, registry_lookup,
    CalibrationError, CphaseCurve, GateDesign, GateRegistry, IswapCurve,
};
use crate::device::{make_pulse, Channel, DeviceError, PulseProgram, Qubit};
use crate::experiments::{
    detuning_offsets, landscape_scan, measure_fsim, swap_spectroscopy, unitary_tomography, ExperimentError, LandscapeConfig,
    ScanMode, Simulator,
};
use crate::fsim::{FsimParams, TomographyElements};
use crate::output::{fmt_f64, Provenance, Table};

pub const MANIFEST_SCHEMA: &str = "fsimlab.manifest/1";
pub const BENCHMARK_SCHEMA: &str = "fsimlab.benchmark/1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("schema mismatch in {}", .0.join(", "))]
    SchemaMismatch(Vec<String>),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "fsimlab", version, about = "Simulated gmon fSim gate experiments, benchmarks and calibration")]
pub struct Cli {
    /// JSON run configuration, or a manifest from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed (overrides the configuration and FSIMLAB_SEED).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exact outcome probabilities instead of sampled shots.
    #[arg(long, global = true)]
    pub expectation: bool,
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Pixel scan over detuning and coupling.
    Scan {
        #[arg(long, value_enum)]
        mode: Option<ScanArg>,
    },
    /// Swap spectroscopy of the coupler: g versus coupler bias.
    Spectroscopy,
    /// Unitary tomography of a gate.
    Tomography,
    /// Cross-entropy benchmarking.
    Xeb,
    /// Purity benchmarking.
    Purity,
    /// Single-qubit randomized benchmarking of both qubits.
    Rb,
    /// Closed-loop calibration.
    Calibrate {
        #[arg(value_enum)]
        family: Family,
        /// Target grid for `fsim`; only `525` is built in.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Aggregate benchmark summaries.
    Report { files: Vec<PathBuf> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanArg {
    Theta,
    Phi,
    Leakage,
    Population,
}

impl From<ScanArg> for ScanMode {
    fn from(a: ScanArg) -> Self {
        match a {
            ScanArg::Theta => ScanMode::Theta,
            ScanArg::Phi => ScanMode::Phi,
            ScanArg::Leakage => ScanMode::Leakage,
            ScanArg::Population => ScanMode::Population,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Cphase,
    Iswap,
    Fsim,
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Scan { .. } => "scan".into(),
            Command::Spectroscopy => "spectroscopy".into(),
            Command::Tomography => "tomography".into(),
            Command::Xeb => "xeb".into(),
            Command::Purity => "purity".into(),
            Command::Rb => "rb".into(),
            Command::Calibrate { family, .. } => format!("calibrate {}", family.to_possible_value().expect("no skipped variants").get_name()),
            Command::Report { .. } => "report".into(),
        }
    }
}

/// A JSON artifact with its schema and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: String,
    pub seed: u64,
    pub config_hash: String,
    pub data: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub fsimlab: String,
    pub registry_schema: u32,
    pub benchmark_schema: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            fsimlab: env!("CARGO_PKG_VERSION").into(),
            registry_schema: crate::calibration::REGISTRY_SCHEMA_VERSION,
            benchmark_schema: BENCHMARK_SCHEMA.into(),
        }
    }
}

/// A grid cell or gate that did not produce a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub cell: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub status: RunStatus,
    pub seed: u64,
    pub config_hash: String,
    pub versions: Versions,
    pub config: RunConfig,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub failed: Vec<FailedCell>,
}

/// Output directory bookkeeping for one run.
struct Writer {
    dir: PathBuf,
    prov: Provenance,
    outputs: Vec<String>,
}

impl Writer {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn io(&self, name: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
        let path = self.path(name);
        move |source| CliError::Io { path: path.clone(), source }
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let f = std::fs::File::create(self.path(name)).map_err(self.io(name))?;
        table.write_csv(std::io::BufWriter::new(f), &self.prov)?;
        self.outputs.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, schema: &str, data: &T) -> Result<(), CliError> {
        let env = Envelope {
            schema: schema.into(),
            seed: self.prov.seed,
            config_hash: self.prov.config_hash.clone(),
            data,
        };
        self.raw(name, &serde_json::to_string_pretty(&env)?)
    }

    fn raw(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        std::fs::write(self.path(name), text).map_err(self.io(name))?;
        self.outputs.push(name.into());
        Ok(())
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

/// Builds the effective configuration from the file, the environment and
/// the command-line overrides, in increasing precedence.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if cli.expectation {
        cfg.expectation = true;
    }
    if let Some(n) = cli.shots {
        cfg.shots = n;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.command {
        Command::Scan { mode: Some(m) } => cfg.scan.mode = (*m).into(),
        Command::Calibrate { grid: Some(g), .. } => {
            if g != "525" {
                return Err(CliError::Config(format!("unknown grid {g:?}; only 525 is built in")));
            }
            cfg.calibrate.targets = TargetGrid::Grid525;
        }
        _ => {}
    }
    Ok(cfg)
}

/// Runs one command and writes its artifacts plus a manifest.
pub fn run(command: &Command, config: &RunConfig) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| run_inner(command, config))
}

fn run_inner(command: &Command, config: &RunConfig) -> Result<RunOutcome, CliError> {
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    let hash = config.hash();
    let mut w = Writer {
        dir: dir.clone(),
        prov: Provenance::new(config.seed, hash.clone()),
        outputs: Vec::new(),
    };
    let failed = match command {
        Command::Scan { .. } => run_scan(config, &mut w)?,
        Command::Spectroscopy => run_spectroscopy(config, &mut w)?,
        Command::Tomography => run_tomography(config, &mut w)?,
        Command::Xeb => run_benchmark(config, &mut w, false)?,
        Command::Purity => run_benchmark(config, &mut w, true)?,
        Command::Rb => run_rb(config, &mut w)?,
        Command::Calibrate { family, .. } => run_calibrate(config, *family, &mut w)?,
        Command::Report { files } => {
            let summary = report(files)?;
            w.csv("report_gates.csv", &summary.gate_table())?;
            w.csv("report_histograms.csv", &summary.histogram_table())?;
            w.json("report.json", REPORT_SCHEMA, &summary)?;
            Vec::new()
        }
    };
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        command: command.name(),
        status: if failed.is_empty() { RunStatus::Ok } else { RunStatus::Partial },
        seed: config.seed,
        config_hash: hash,
        versions: Versions::default(),
        config: config.clone(),
        outputs: w.outputs.clone(),
        failed,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join(MANIFEST_FILE), text).map_err(|source| CliError::Io {
        path: dir.join(MANIFEST_FILE),
        source,
    })?;
    Ok(RunOutcome { manifest, output_dir: dir })
}

/// Entry point of the binary: 0 on success, 2 when some cells failed, 1 on
/// error.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = effective_config(&cli).and_then(|cfg| run(&cli.command, &cfg));
    match result {
        Ok(out) => {
            eprintln!("{}: wrote {} files to {}", out.manifest.command, out.manifest.outputs.len() + 1, out.output_dir.display());
            if out.manifest.failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} cells failed; see {}", out.manifest.failed.len(), MANIFEST_FILE);
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("fsimlab: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_scan(config: &RunConfig, w: &mut Writer) -> Result<Vec<FailedCell>, CliError> {
    let p = &config.scan;
    if p.n_delta < 2 || p.n_g < 2 {
        return Err(CliError::Config("scan axes need at least 2 points".into()));
    }
    let sim = config.simulator()?;
    let model = &sim.model;
    let off = model.coupler.off_bias();
    let deltas: Vec<f64> = (0..p.n_delta)
        .map(|k| p.delta_min_mhz + (p.delta_max_mhz - p.delta_min_mhz) * k as f64 / (p.n_delta - 1) as f64)
        .collect();
    let coupler = (0..p.n_g)
        .map(|k| model.coupler.bias_for_g(-p.g_max_mhz * k as f64 / (p.n_g - 1) as f64).map(|b| b - off))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = LandscapeConfig {
        duration_ns: p.duration_ns,
        pad_ns: p.pad_ns,
        shape: p.shape,
        qubit_span: crate::device::QubitSpan::Padded,
        readout: p.readout,
    };
    let scan = landscape_scan(&sim, p.mode, &deltas, &coupler, &cfg)?;
    let name = format!("scan_{}", p.mode);
    w.csv(&format!("{name}.csv"), &scan.to_table())?;
    let finite: Vec<f64> = scan.values.iter().copied().filter(|v| v.is_finite()).collect();
    #[derive(Serialize)]
    struct ScanSummary {
        mode: ScanMode,
        n_delta: usize,
        n_g: usize,
        min: Option<f64>,
        max: Option<f64>,
    }
    let summary = ScanSummary {
        mode: p.mode,
        n_delta: deltas.len(),
        n_g: coupler.len(),
        min: finite.iter().copied().reduce(f64::min),
        max: finite.iter().copied().reduce(f64::max),
    };
    w.json(&format!("{name}.json"), "fsimlab.scan/1", &summary)?;
    Ok(Vec::new())
}

fn run_spectroscopy(config: &RunConfig, w: &mut Writer) -> Result<Vec<FailedCell>, CliError> {
    let p = &config.spectroscopy;
    if p.n_bias < 1 {
        return Err(CliError::Config("spectroscopy needs at least one bias".into()));
    }
    let sim = config.simulator()?;
    let biases: Vec<f64> = (0..p.n_bias)
        .map(|k| if p.n_bias == 1 { p.bias_min } else { p.bias_min + (p.bias_max - p.bias_min) * k as f64 / (p.n_bias - 1) as f64 })
        .collect();
    let durations: Vec<f64> = (0..p.n_durations).map(|k| k as f64 * p.duration_step_ns).collect();
    let r = swap_spectroscopy(&sim, &biases, &durations)?;
    w.csv("spectroscopy_scan.csv", &r.scan.to_table())?;
    let mut t = Table::new(["coupler_bias", "g_mhz", "model_abs_g_mhz", "flagged"]);
    for (i, b) in biases.iter().enumerate() {
        t.push(vec![
            fmt_f64(*b),
            fmt_f64(r.g_mhz[i]),
            fmt_f64(sim.model.coupler_g(*b)?.abs()),
            r.flagged[i].to_string(),
        ]);
    }
    w.csv("spectroscopy_g.csv", &t)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        bin_mhz: f64,
        coupler_bias: &'a [f64],
        g_mhz: &'a [f64],
        flagged: &'a [bool],
    }
    w.json(
        "spectroscopy.json",
        "fsimlab.spectroscopy/1",
        &Summary {
            bin_mhz: r.bin_mhz,
            coupler_bias: &biases,
            g_mhz: &r.g_mhz,
            flagged: &r.flagged,
        },
    )?;
    Ok(r
        .flagged
        .iter()
        .zip(&biases)
        .filter(|(f, _)| **f)
        .map(|(_, b)| FailedCell {
            cell: format!("coupler_bias={b}"),
            reason: "swap oscillation below the noise floor".into(),
        })
        .collect())
}

/// A two-qubit gate ready to benchmark.
struct ResolvedGate {
    label: String,
    channel: Channel,
    model: FsimParams,
    program: Option<PulseProgram>,
}

fn resolve_gates(sim: &Simulator, source: &GateSource) -> Result<(Vec<ResolvedGate>, Vec<FailedCell>), CliError> {
    let mut failed = Vec::new();
    let gates = match source {
        GateSource::Ideal {
            theta_deg,
            phi_deg,
            depolarizing,
        } => {
            let model = FsimParams::from_degrees(*theta_deg, *phi_deg);
            vec![ResolvedGate {
                label: format!("ideal({theta_deg},{phi_deg})"),
                channel: with_depolarizing(&fsim_channel(&model), *depolarizing)?,
                model,
                program: None,
            }]
        }
        GateSource::Registry { path, targets } => {
            let reg = GateRegistry::load(path)?;
            let entries: Vec<_> = match targets {
                None => reg.entries.iter().collect(),
                Some(ts) => ts
                    .iter()
                    .map(|t| registry_lookup(&reg, t[0], t[1]).map(|l| l.entry))
                    .collect::<Result<_, _>>()?,
            };
            let mut out = Vec::new();
            for e in entries {
                let label = format!("fsim({},{})", e.target_theta_deg, e.target_phi_deg);
                if !e.converged {
                    failed.push(FailedCell {
                        cell: label.clone(),
                        reason: "registry entry not converged".into(),
                    });
                }
                let program = e.program(&reg.design, &sim.model)?;
                out.push(ResolvedGate {
                    label,
                    channel: sim.channel(&program)?,
                    model: e.measured,
                    program: Some(program),
                });
            }
            out
        }
        GateSource::Pulse {
            delta_mhz,
            g_mhz,
            duration_ns,
            pad_ns,
            shape,
        } => {
            let m = &sim.model;
            let [a0, a1] = detuning_offsets(m, *delta_mhz)?;
            let c = m.coupler.bias_for_g(*g_mhz)? - m.coupler.off_bias();
            let program = make_pulse(*duration_ns, *pad_ns, [a0, a1, c], *shape, m.sample_rate)?;
            let model = measure_fsim(sim, &program)?;
            vec![ResolvedGate {
                label: format!("pulse({delta_mhz},{g_mhz},{duration_ns})"),
                channel: sim.channel(&program)?,
                model,
                program: Some(program),
            }]
        }
    };
    Ok((gates, failed))
}

fn run_tomography(config: &RunConfig, w: &mut Writer) -> Result<Vec<FailedCell>, CliError> {
    let sim = config.simulator()?;
    let (gates, failed) = resolve_gates(&sim, &config.tomography.gate)?;
    let mut t = Table::new(["gate", "theta_deg", "phi_deg", "delta_plus_deg", "delta_minus_deg", "delta_minus_off_deg"]);
    #[derive(Serialize)]
    struct Row {
        gate: String,
        params: FsimParams,
        elements: TomographyElements,
    }
    let mut rows = Vec::new();
    for g in gates {
        let program = g
            .program
            .ok_or_else(|| CliError::Unsupported("tomography needs a registry or pulse gate, not an ideal unitary".into()))?;
        let elements = unitary_tomography(&sim, &program)?;
        let params = crate::fsim::extract_fsim_params(&elements).map_err(ExperimentError::from)?;
        t.push(vec![
            g.label.clone(),
            fmt_f64(params.theta_deg()),
            fmt_f64(params.phi_deg()),
            fmt_f64(params.delta_plus.to_degrees()),
            fmt_f64(params.delta_minus.to_degrees()),
            fmt_f64(params.delta_minus_off.to_degrees()),
        ]);
        rows.push(Row {
            gate: g.label,
            params,
            elements,
        });
    }
    w.csv("tomography.csv", &t)?;
    w.json("tomography.json", "fsimlab.tomography/1", &rows)?;
    Ok(failed)
}

fn run_benchmark(config: &RunConfig, w: &mut Writer, purity: bool) -> Result<Vec<FailedCell>, CliError> {
    let sim = config.simulator()?;
    let (source, depths, n, seed) = if purity {
        let p = &config.purity;
        (&p.gate, p.depths.clone(), p.circuits_per_depth, p.circuit_seed)
    } else {
        let p = &config.xeb;
        (&p.gate, p.depths.clone(), p.circuits_per_depth, p.circuit_seed)
    };
    let circuits = generate_xeb_circuits(&depths.unwrap_or_else(default_depths), n, seed)?;
    let (gates, mut failed) = resolve_gates(&sim, source)?;
    let sq = sim.single_qubit_error();
    let mut t = Table::new(["gate", "depth", "fidelity", "stderr", "n"]);
    let mut summaries = Vec::new();
    for g in gates {
        let result = if purity {
            purity_benchmark(&sim, &g.channel, &circuits).map(|r| (None, Some(r)))
        } else if config.xeb.optimize_phases {
            let measured = measure_circuits(&sim, &g.channel, &circuits);
            ex_situ_optimize(&g.model, &PHASES, &circuits, &measured)
                .and_then(|o| analyze_xeb(&circuits, &measured, &o.params))
                .map(|r| (Some(r), None))
        } else {
            run_xeb(&sim, &g.channel, &g.model, &circuits).map(|r| (Some(r), None))
        };
        let (xeb, pur) = match result {
            Ok(r) => r,
            Err(e) => {
                failed.push(FailedCell {
                    cell: g.label,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let points = xeb.as_ref().map(|r| &r.points).or(pur.as_ref().map(|r| &r.points)).expect("one result is set");
        for p in points {
            t.push(vec![g.label.clone(), p.depth.to_string(), fmt_f64(p.fidelity), fmt_f64(p.stderr), p.n.to_string()]);
        }
        summaries.push(BenchmarkSummary {
            gate: g.label,
            xeb,
            purity: pur,
            budget: None,
            single_qubit: [sq; 2],
        });
    }
    let name = if purity { "purity" } else { "xeb" };
    w.csv(&format!("{name}_points.csv"), &t)?;
    w.json(&format!("{name}.json"), BENCHMARK_SCHEMA, &summaries)?;
    Ok(failed)
}

fn run_rb(config: &RunConfig, w: &mut Writer) -> Result<Vec<FailedCell>, CliError> {
    let sim = config.simulator()?;
    let p = &config.rb;
    let mut t = Table::new(["qubit", "depth", "survival", "stderr", "n"]);
    let mut results = Vec::new();
    for q in [Qubit::Q0, Qubit::Q1] {
        let r = single_qubit_rb(&sim, q, &p.depths, p.sequences, None)?;
        for d in &r.points {
            t.push(vec![format!("{q:?}"), d.depth.to_string(), fmt_f64(d.fidelity), fmt_f64(d.stderr), d.n.to_string()]);
        }
        results.push(r);
    }
    w.csv("rb_points.csv", &t)?;
    w.json("rb.json", "fsimlab.rb/1", &results)?;
    Ok(Vec::new())
}

fn phi_grid() -> Vec<f64> {
    (-179..=180).map(f64::from).collect()
}

fn cphase_outputs(w: &mut Writer, curve: &CphaseCurve) -> Result<(), CliError> {
    w.csv("cphase_curve.csv", &curve.to_table())?;
    w.json("cphase_curve.json", "fsimlab.cphase_curve/1", curve)
}

fn iswap_outputs(w: &mut Writer, curve: &IswapCurve) -> Result<(), CliError> {
    w.csv("iswap_curve.csv", &curve.to_table())?;
    w.json("iswap_curve.json", "fsimlab.iswap_curve/1", curve)
}

fn run_calibrate(config: &RunConfig, family: Family, w: &mut Writer) -> Result<Vec<FailedCell>, CliError> {
    let sim = config.simulator()?;
    let p = &config.calibrate;
    let design = GateDesign {
        order: p.order,
        ..GateDesign::default()
    };
    let mut failed = Vec::new();
    let cphase = |failed: &mut Vec<FailedCell>| -> Result<CphaseCurve, CliError> {
        let c = calibrate_cphase_family(&sim, &design, &p.sweep, &phi_grid())?;
        if c.max_residual_theta_deg() > 5.0 {
            failed.push(FailedCell {
                cell: "cphase".into(),
                reason: format!("residual swap angle {:.2} deg above 5 deg", c.max_residual_theta_deg()),
            });
        }
        Ok(c)
    };
    let iswap = |failed: &mut Vec<FailedCell>| -> Result<IswapCurve, CliError> {
        let c = calibrate_iswap_family(&sim, &design, p.iswap_points)?;
        if c.flagged {
            failed.push(FailedCell {
                cell: "iswap".into(),
                reason: format!("swapped population {:.4} below threshold", c.swap_population),
            });
        }
        Ok(c)
    };
    match family {
        Family::Cphase => cphase_outputs(w, &cphase(&mut failed)?)?,
        Family::Iswap => iswap_outputs(w, &iswap(&mut failed)?)?,
        Family::Fsim => {
            let c = cphase(&mut failed)?;
            let i = iswap(&mut failed)?;
            cphase_outputs(w, &c)?;
            iswap_outputs(w, &i)?;
            let targets: Vec<(f64, f64)> = match &p.targets {
                TargetGrid::Grid525 => fsim_grid_525(),
                TargetGrid::List(l) => l.iter().map(|t| (t[0], t[1])).collect(),
            };
            let mut cfg = p.composite;
            if p.stamp_time {
                cfg.calibrated_at = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
            }
            let (mut reg, stages) = calibrate_composite_fsim(&sim, &c, &i, &targets, &cfg)?;
            reg.provenance = Some(w.prov.clone());
            let mut t = Table::new(["phi_deg", "delta_mhz", "q0", "q1", "coupler", "theta_deg", "measured_phi_deg", "coupler_0", "coupler_90"]);
            for (k, e) in stages.cphase.iter().enumerate() {
                let a = e.controls.amplitudes;
                t.push(vec![
                    fmt_f64(e.controls.phi_deg),
                    fmt_f64(e.controls.delta_mhz),
                    fmt_f64(a[0]),
                    fmt_f64(a[1]),
                    fmt_f64(a[2]),
                    fmt_f64(e.measured.theta_deg()),
                    fmt_f64(e.measured.phi_deg()),
                    fmt_f64(stages.endpoints[k].coupler_0),
                    fmt_f64(stages.endpoints[k].coupler_90),
                ]);
            }
            w.csv("cphase_registry.csv", &t)?;
            w.csv("convergence.csv", &reg.convergence_table())?;
            w.raw("registry.json", &reg.to_json_string())?;
            for e in reg.entries.iter().filter(|e| !e.converged) {
                failed.push(FailedCell {
                    cell: format!("theta={},phi={}", e.target_theta_deg, e.target_phi_deg),
                    reason: e.failure.clone().unwrap_or_else(|| {
                        format!("residual ({:.2}, {:.2}) deg after {} adjustments", e.residual_deg[0], e.residual_deg[1], e.iterations)
                    }),
                });
            }
        }
    }
    Ok(failed)
}

/// Reads a JSON artifact and returns its schema tag, if any.
fn schema_of(path: &Path) -> Result<(Option<String>, serde_json::Value), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    Ok((v.get("schema").and_then(|s| s.as_str()).map(String::from), v))
}
