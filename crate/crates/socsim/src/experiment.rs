//! Experiment harness: wires configs, traces, and kernels into the named
//! experiments and emits CSV result tables.
//!
//! Every experiment is fully determined by (config, experiment spec, seed).
//! Sweep points run as independent simulation instances — concurrently when
//! the `parallel` feature is on — and merge in declared order, so output is
//! byte-stable.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SocConfig;
use crate::host::{
    gen_stride_trace, parse_trace, run_trace, L1Config, L1State, SimError, SimResult,
    StrideBenchmarkSpec, TraceError, TraceRecord, STRIDE_FILL_BYTES,
};
use crate::llc::LlcState;
use crate::mem::{Backend, MemError, TxnKind};
use crate::parallel::{map_points, map_points_sequential};
use crate::pmca::{host_cycles, offload_total_cycles, KernelDescriptor, PmcaError};
use crate::power::{
    self, component_power_mw, relative_efficiency, AnalysisError, CcrTraffic, ComponentId,
};

/// The four memory configurations experiments compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryVariant {
    Ddr4Llc,
    HyperLlc,
    Ddr4,
    Hyper,
}

impl MemoryVariant {
    pub const ALL: [MemoryVariant; 4] = [
        MemoryVariant::Ddr4Llc,
        MemoryVariant::HyperLlc,
        MemoryVariant::Ddr4,
        MemoryVariant::Hyper,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MemoryVariant::Ddr4Llc => "ddr4+llc",
            MemoryVariant::HyperLlc => "hyper+llc",
            MemoryVariant::Ddr4 => "ddr4",
            MemoryVariant::Hyper => "hyper",
        }
    }

    pub fn has_llc(&self) -> bool {
        matches!(self, MemoryVariant::Ddr4Llc | MemoryVariant::HyperLlc)
    }

    pub fn backend(&self, cfg: &SocConfig) -> Backend {
        match self {
            MemoryVariant::Ddr4Llc | MemoryVariant::Ddr4 => Backend::ddr(cfg.ddr.clone()),
            MemoryVariant::HyperLlc | MemoryVariant::Hyper => {
                Backend::hyper(cfg.hyper.clone(), cfg.clocks.host_domain.freq_mhz)
            }
        }
    }
}

/// Synthetic random trace: uniform accesses over a window in the cacheable
/// region, preceded by a deterministic warm-up (one sequential pass plus
/// random touches) that is excluded from measurement. `scatter_per_mille`
/// sends that fraction of accesses to a much wider span instead, giving the
/// trace a controllable residue of cache-missing traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticTraceSpec {
    pub accesses: u64,
    pub window_bytes: u64,
    pub write_percent: u64,
    pub warmup_accesses: u64,
    pub scatter_per_mille: u64,
    pub scatter_span_bytes: u64,
}

impl Default for SyntheticTraceSpec {
    fn default() -> Self {
        Self {
            accesses: 100_000,
            window_bytes: 64 * 1024,
            write_percent: 10,
            warmup_accesses: 20_000,
            scatter_per_mille: 0,
            scatter_span_bytes: 16 * 1024 * 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    /// The strided-read benchmark across the four memory configurations.
    StrideSweep {
        #[serde(default = "default_strides")]
        strides: Vec<u64>,
        #[serde(default = "default_rounds")]
        rounds: u64,
        #[serde(default = "default_access_bytes")]
        access_bytes: u64,
    },
    /// One trace, replayed on all four memory configurations.
    LlcCompare {
        #[serde(default)]
        trace_file: Option<PathBuf>,
        #[serde(default)]
        synthetic: Option<SyntheticTraceSpec>,
    },
    /// Offload speedup and energy efficiency per catalog kernel.
    PmcaSpeedup {
        #[serde(default)]
        kernels: Option<Vec<String>>,
        #[serde(default = "default_invocations")]
        invocations: Vec<u64>,
    },
    /// Synthetic kernels swept across a CCR grid, compared on both backends.
    CcrEfficiency {
        #[serde(default = "default_ccr_targets")]
        ccr_targets: Vec<f64>,
        #[serde(default)]
        traffic: CcrTraffic,
    },
    /// The component power table evaluated at maximum frequency.
    PowerReport {},
    /// Replay a trace file on one memory configuration.
    TraceReplay {
        trace_file: PathBuf,
        #[serde(default = "default_variant")]
        variant: MemoryVariant,
    },
}

fn default_strides() -> Vec<u64> {
    vec![1, 2, 4, 8, 16, 32]
}
fn default_rounds() -> u64 {
    10
}
fn default_access_bytes() -> u64 {
    8
}
fn default_invocations() -> Vec<u64> {
    vec![1, 1000]
}
fn default_ccr_targets() -> Vec<f64> {
    vec![
        4.0, 3.0, 2.0, 1.5, 1.2, 1.0, 0.8, 0.6, 0.4, 0.3, 0.2, 0.15, 0.1, 0.05,
    ]
}
fn default_variant() -> MemoryVariant {
    MemoryVariant::HyperLlc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub spec: ExperimentSpec,
}

impl Experiment {
    pub fn kind_label(&self) -> &'static str {
        match self.spec {
            ExperimentSpec::StrideSweep { .. } => "stride-sweep",
            ExperimentSpec::LlcCompare { .. } => "llc-compare",
            ExperimentSpec::PmcaSpeedup { .. } => "pmca-speedup",
            ExperimentSpec::CcrEfficiency { .. } => "ccr-efficiency",
            ExperimentSpec::PowerReport {} => "power-report",
            ExperimentSpec::TraceReplay { .. } => "trace-replay",
        }
    }

    /// Resolve trace paths relative to `base` (the experiment file's dir).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.spec {
            ExperimentSpec::LlcCompare {
                trace_file: Some(p),
                ..
            } => fix(p),
            ExperimentSpec::TraceReplay { trace_file, .. } => fix(trace_file),
            _ => {}
        }
    }
}

pub fn load_experiment(text: &str) -> Result<Experiment, ExperimentError> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_experiment_file(path: &Path) -> Result<Experiment, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut e = load_experiment(&text)?;
    if let Some(dir) = path.parent() {
        e.resolve_paths(dir);
    }
    Ok(e)
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown kernel '{0}' (not in the calibration catalog)")]
    UnknownKernel(String),
    #[error("llc-compare needs either trace_file or synthetic")]
    MissingTrace,
    #[error("stride benchmark needs a 4 KiB-aligned cacheable window of at least 4 KiB")]
    WindowUnsuitable,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed experiment document")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pmca(#[from] PmcaError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error(transparent)]
    Power(#[from] power::PowerError),
}

/// One CSV cell; floats are printed with six significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(u64),
    Float(f64),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

/// Decimal notation with six significant digits.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (5 - exp).clamp(0, 17) as usize;
    format!("{v:.decimals$}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_sig6(*v),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub kind: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.columns.len());
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Write a table to `<dir>/<kind>.csv` and return the path.
pub fn emit_csv(table: &ResultTable, dir: &Path) -> Result<PathBuf, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(format!("{}.csv", table.kind));
    std::fs::write(&path, table.to_csv()).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Run an experiment against a validated configuration. Points run through
/// `map_points` (parallel under the `parallel` feature).
pub fn run_experiment(cfg: &SocConfig, e: &Experiment) -> Result<ResultTable, ExperimentError> {
    run_experiment_with(cfg, e, true)
}

/// Sequential twin of `run_experiment`; same results, one point at a time.
pub fn run_experiment_sequential(
    cfg: &SocConfig,
    e: &Experiment,
) -> Result<ResultTable, ExperimentError> {
    run_experiment_with(cfg, e, false)
}

type PointRows = Result<Vec<Vec<Cell>>, ExperimentError>;

/// Work item for one sweep point, self-contained so points can run on any
/// thread.
#[derive(Clone)]
enum PointWork {
    Stride {
        stride: u64,
        variant: MemoryVariant,
        rounds: u64,
        access_bytes: u64,
    },
    Replay {
        variant: MemoryVariant,
        warmup: Vec<TraceRecord>,
        measured: Vec<TraceRecord>,
    },
    Speedup {
        kernel: KernelDescriptor,
        invocations: u64,
    },
    Ccr {
        name: String,
        bytes: u64,
        traffic: CcrTraffic,
    },
}

fn run_experiment_with(
    cfg: &SocConfig,
    e: &Experiment,
    parallel: bool,
) -> Result<ResultTable, ExperimentError> {
    let (columns, points): (Vec<&'static str>, Vec<PointWork>) = match &e.spec {
        ExperimentSpec::StrideSweep {
            strides,
            rounds,
            access_bytes,
        } => {
            let cols = vec![
                "stride",
                "config",
                "l1_miss_ratio",
                "llc_miss_ratio",
                "cycles",
            ];
            let mut pts = Vec::new();
            for &stride in strides {
                for variant in MemoryVariant::ALL {
                    pts.push(PointWork::Stride {
                        stride,
                        variant,
                        rounds: *rounds,
                        access_bytes: *access_bytes,
                    });
                }
            }
            (cols, pts)
        }
        ExperimentSpec::LlcCompare {
            trace_file,
            synthetic,
        } => {
            let (warmup, measured) = compare_trace(cfg, e.seed, trace_file.as_deref(), *synthetic)?;
            let cols = vec![
                "config",
                "records",
                "cycles",
                "l1_miss_ratio",
                "llc_hit_ratio",
                "llc_miss_ratio",
                "backend_read_bytes",
                "backend_write_bytes",
            ];
            let pts = MemoryVariant::ALL
                .into_iter()
                .map(|variant| PointWork::Replay {
                    variant,
                    warmup: warmup.clone(),
                    measured: measured.clone(),
                })
                .collect();
            (cols, pts)
        }
        ExperimentSpec::PmcaSpeedup {
            kernels,
            invocations,
        } => {
            let selected: Vec<KernelDescriptor> = match kernels {
                None => cfg.calibration.kernels.clone(),
                Some(names) => names
                    .iter()
                    .map(|n| {
                        cfg.calibration
                            .kernel(n)
                            .cloned()
                            .ok_or_else(|| ExperimentError::UnknownKernel(n.clone()))
                    })
                    .collect::<Result<_, _>>()?,
            };
            let cols = vec![
                "kernel",
                "invocations",
                "host_cycles",
                "pmca_cycles",
                "overhead_cycles",
                "speedup",
                "pmca_gops",
                "pmca_gops_per_w",
                "host_gops",
                "host_gops_per_w",
                "efficiency_ratio",
            ];
            let mut pts = Vec::new();
            for k in &selected {
                for &n in invocations {
                    pts.push(PointWork::Speedup {
                        kernel: k.clone(),
                        invocations: n,
                    });
                }
            }
            (cols, pts)
        }
        ExperimentSpec::CcrEfficiency {
            ccr_targets,
            traffic,
        } => {
            let cols = vec![
                "kernel",
                "ccr_hyper",
                "t_compute_s",
                "t_mem_hyper_s",
                "gops_hyper",
                "gops_lpddr",
                "gops_per_w_hyper",
                "gops_per_w_lpddr",
                "relative_efficiency",
            ];
            let pts = ccr_targets
                .iter()
                .enumerate()
                .map(|(i, &target)| PointWork::Ccr {
                    name: format!("synthetic-{i:02}"),
                    bytes: bytes_for_ccr_target(cfg, target),
                    traffic: *traffic,
                })
                .collect();
            (cols, pts)
        }
        ExperimentSpec::PowerReport {} => return power_report(cfg),
        ExperimentSpec::TraceReplay {
            trace_file,
            variant,
        } => {
            let text =
                std::fs::read_to_string(trace_file).map_err(|source| ExperimentError::Io {
                    path: trace_file.display().to_string(),
                    source,
                })?;
            let measured = parse_trace(&text)?;
            let cols = vec![
                "config",
                "records",
                "cycles",
                "l1_hits",
                "l1_misses",
                "llc_hits",
                "llc_misses",
                "evictions",
                "writebacks",
                "backend_read_bytes",
                "backend_write_bytes",
            ];
            (
                cols,
                vec![PointWork::Replay {
                    variant: *variant,
                    warmup: Vec::new(),
                    measured,
                }],
            )
        }
    };

    let long_form = matches!(e.spec, ExperimentSpec::TraceReplay { .. });
    let point_fn = |work: PointWork| run_point(cfg, work, long_form);
    let results = if parallel {
        map_points(points, point_fn)
    } else {
        map_points_sequential(points, point_fn)
    };

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(ResultTable {
        kind: e.kind_label(),
        columns,
        rows,
    })
}

fn run_point(cfg: &SocConfig, work: PointWork, long_form: bool) -> PointRows {
    match work {
        PointWork::Stride {
            stride,
            variant,
            rounds,
            access_bytes,
        } => {
            let spec = StrideBenchmarkSpec {
                stride_s: stride,
                rounds,
                access_bytes,
            };
            spec.validate()?;
            let l1cfg = L1Config::default();
            let window = cfg.cacheable_window();
            if !window.base.is_multiple_of(STRIDE_FILL_BYTES) || window.size < STRIDE_FILL_BYTES {
                return Err(ExperimentError::WindowUnsuitable);
            }
            let base = window.base;
            let trace = gen_stride_trace(&spec, &l1cfg, base);
            let warm = spec.warmup_len(&l1cfg);
            let (_, measured) = replay(cfg, variant, &trace[..warm], &trace[warm..])?;
            let llc_ratio = if variant.has_llc() {
                Cell::Float(measured.llc_miss_ratio())
            } else {
                Cell::Empty
            };
            Ok(vec![vec![
                Cell::Int(stride),
                variant.label().into(),
                Cell::Float(measured.l1_miss_ratio()),
                llc_ratio,
                Cell::Int(measured.soc_cycles),
            ]])
        }
        PointWork::Replay {
            variant,
            warmup,
            measured,
        } => {
            let (_, res) = replay(cfg, variant, &warmup, &measured)?;
            if long_form {
                Ok(vec![vec![
                    variant.label().into(),
                    Cell::Int(res.records),
                    Cell::Int(res.soc_cycles),
                    Cell::Int(res.l1_hits),
                    Cell::Int(res.l1_misses),
                    Cell::Int(res.llc.hits),
                    Cell::Int(res.llc.misses),
                    Cell::Int(res.llc.evictions),
                    Cell::Int(res.llc.writebacks),
                    Cell::Int(res.backend_read_bytes),
                    Cell::Int(res.backend_write_bytes),
                ]])
            } else {
                let (hit, miss) = if variant.has_llc() {
                    (
                        Cell::Float(res.llc_hit_ratio()),
                        Cell::Float(res.llc_miss_ratio()),
                    )
                } else {
                    (Cell::Empty, Cell::Empty)
                };
                Ok(vec![vec![
                    variant.label().into(),
                    Cell::Int(res.records),
                    Cell::Int(res.soc_cycles),
                    Cell::Float(res.l1_miss_ratio()),
                    hit,
                    miss,
                    Cell::Int(res.backend_read_bytes),
                    Cell::Int(res.backend_write_bytes),
                ]])
            }
        }
        PointWork::Speedup {
            kernel,
            invocations,
        } => {
            let k = kernel.with_invocations(invocations);
            let backend = Backend::hyper(cfg.hyper.clone(), cfg.clocks.host_domain.freq_mhz);
            let off = offload_total_cycles(
                &k,
                cfg.calibration.offload_fixed_host_cycles,
                &backend,
                &cfg.clocks,
            )?;
            let host = host_cycles(&k);
            let pmca_p = power_of(cfg, ComponentId::Pmca)?;
            let host_p = power_of(cfg, ComponentId::Cva6)?;
            let pmca_gops = k.pmca_gops(cfg.clocks.cluster.freq_mhz);
            let host_gops = k.host_gops(cfg.clocks.host_core.freq_mhz);
            let pmca_eff = pmca_gops / (pmca_p / 1000.0);
            let host_eff = host_gops / (host_p / 1000.0);
            Ok(vec![vec![
                Cell::Str(k.name.clone()),
                Cell::Int(invocations),
                Cell::Float(host),
                Cell::Float(off.total_cycles),
                Cell::Float(off.overhead_cycles),
                Cell::Float(host / off.total_cycles),
                Cell::Float(pmca_gops),
                Cell::Float(pmca_eff),
                Cell::Float(host_gops),
                Cell::Float(host_eff),
                Cell::Float(pmca_eff / host_eff),
            ]])
        }
        PointWork::Ccr {
            name,
            bytes,
            traffic,
        } => {
            let k = synthetic_ccr_kernel(&name, bytes);
            let hyper = Backend::hyper(cfg.hyper.clone(), cfg.clocks.host_domain.freq_mhz);
            let lpddr = Backend::ddr(cfg.ddr.clone());
            let a = relative_efficiency(&k, &cfg.clocks, &hyper, &lpddr, &cfg.power, traffic)?;
            Ok(vec![vec![
                Cell::Str(name),
                Cell::Float(a.ccr_hyper),
                Cell::Float(a.t_compute_s),
                Cell::Float(a.t_mem_hyper_s),
                Cell::Float(a.gops_hyper),
                Cell::Float(a.gops_lpddr),
                Cell::Float(a.gops_per_w_hyper),
                Cell::Float(a.gops_per_w_lpddr),
                Cell::Float(a.relative_efficiency),
            ]])
        }
    }
}

fn power_of(cfg: &SocConfig, c: ComponentId) -> Result<f64, power::PowerError> {
    let p = cfg
        .power
        .iter()
        .find(|p| p.component == c)
        .ok_or(power::PowerError::UnknownComponent(c))?;
    component_power_mw(p, cfg.clocks.domain(c.clock_domain()).freq_mhz)
}

/// Replay warm-up then measurement with shared cache state; returns both
/// results.
fn replay(
    cfg: &SocConfig,
    variant: MemoryVariant,
    warmup: &[TraceRecord],
    measured: &[TraceRecord],
) -> Result<(SimResult, SimResult), ExperimentError> {
    let backend = variant.backend(cfg);
    let mut l1 = L1State::new(L1Config::default());
    let mut llc = variant.has_llc().then(|| LlcState::new(cfg.llc));
    let w = run_trace(warmup, cfg, &mut l1, llc.as_mut(), &backend)?;
    let m = run_trace(measured, cfg, &mut l1, llc.as_mut(), &backend)?;
    Ok((w, m))
}

/// Build the llc-compare trace: either a file (no warm-up) or the synthetic
/// random-window trace with its warm-up prefix.
fn compare_trace(
    cfg: &SocConfig,
    seed: u64,
    trace_file: Option<&Path>,
    synthetic: Option<SyntheticTraceSpec>,
) -> Result<(Vec<TraceRecord>, Vec<TraceRecord>), ExperimentError> {
    match (trace_file, synthetic) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Ok((Vec::new(), parse_trace(&text)?))
        }
        (None, Some(spec)) => Ok(synthetic_trace(cfg, seed, &spec)),
        (None, None) => Err(ExperimentError::MissingTrace),
    }
}

fn synthetic_trace(
    cfg: &SocConfig,
    seed: u64,
    spec: &SyntheticTraceSpec,
) -> (Vec<TraceRecord>, Vec<TraceRecord>) {
    let base = cfg.cacheable_window().base;
    let slots = (spec.window_bytes / 8).max(1);
    let scatter_slots = (spec.scatter_span_bytes / 8).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let record = |rng: &mut ChaCha8Rng| {
        let addr = if rng.random_range(0..1000) < spec.scatter_per_mille {
            base + rng.random_range(0..scatter_slots) * 8
        } else {
            base + rng.random_range(0..slots) * 8
        };
        let op = if rng.random_range(0..100) < spec.write_percent {
            TxnKind::Write
        } else {
            TxnKind::Read
        };
        TraceRecord {
            op,
            addr,
            len_bytes: 8,
        }
    };

    // warm-up: one sequential sweep over the window, then random touches
    let mut warmup = Vec::new();
    let line = L1Config::default().line_bytes;
    let mut a = base;
    while a < base + spec.window_bytes {
        warmup.push(TraceRecord {
            op: TxnKind::Read,
            addr: a,
            len_bytes: 8,
        });
        a += line;
    }
    for _ in 0..spec.warmup_accesses {
        warmup.push(record(&mut rng));
    }

    let measured = (0..spec.accesses).map(|_| record(&mut rng)).collect();
    (warmup, measured)
}

/// Synthetic kernel for the CCR sweep: fixed compute, traffic sized to hit a
/// target ratio.
pub fn synthetic_ccr_kernel(name: &str, bytes: u64) -> KernelDescriptor {
    KernelDescriptor {
        name: name.to_string(),
        total_ops: 4_194_304,
        bytes_in: bytes / 2,
        bytes_out: bytes - bytes / 2,
        host_ops_per_cycle: 0.25,
        pmca_ops_per_cycle: 32.0,
        code_size_bytes: 0,
        invocations: 1,
        tile_bytes: 16_384,
    }
}

/// Pick total traffic so the HyperRAM CCR of the synthetic kernel comes out
/// near `target`, using the sustained 2 bytes per bus cycle per bus rate.
/// Traffic is rounded to whole input+output tile pairs: full tiles keep the
/// efficiency-versus-CCR curve piecewise exact instead of wiggling with the
/// size of a ragged last burst.
fn bytes_for_ccr_target(cfg: &SocConfig, target: f64) -> u64 {
    let probe = synthetic_ccr_kernel("probe", 0);
    let t_compute_s =
        probe.total_ops as f64 / probe.pmca_ops_per_cycle / cfg.clocks.cluster.freq_hz();
    let t_mem_s = t_compute_s / target;
    let bytes_per_s = 2.0 * cfg.hyper.n_buses as f64 * cfg.hyper.bus_freq_mhz * 1e6;
    let pair = 2 * probe.tile_bytes;
    let pairs = (t_mem_s * bytes_per_s / pair as f64).round().max(1.0) as u64;
    pairs * pair
}

fn power_report(cfg: &SocConfig) -> Result<ResultTable, ExperimentError> {
    let columns = vec![
        "component",
        "freq_mhz",
        "leakage_mw",
        "dynamic_uw_per_mhz",
        "power_mw",
    ];
    let mut rows = Vec::new();
    let (mut leak_sum, mut dyn_sum, mut power_sum) = (0.0, 0.0, 0.0);
    for c in ComponentId::ALL {
        let p = cfg
            .power
            .iter()
            .find(|p| p.component == c)
            .ok_or(power::PowerError::UnknownComponent(c))?;
        let power = component_power_mw(p, p.max_freq_mhz)?;
        leak_sum += p.leakage_mw;
        dyn_sum += p.dynamic_uw_per_mhz;
        power_sum += power;
        rows.push(vec![
            Cell::Str(c.to_string()),
            Cell::Float(p.max_freq_mhz),
            Cell::Float(p.leakage_mw),
            Cell::Float(p.dynamic_uw_per_mhz),
            Cell::Float(power),
        ]);
    }
    rows.push(vec![
        "total".into(),
        Cell::Empty,
        Cell::Float(leak_sum),
        Cell::Float(dyn_sum),
        Cell::Float(power_sum),
    ]);
    Ok(ResultTable {
        kind: "power-report",
        columns,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SocConfig {
        SocConfig::default()
    }

    fn experiment(spec: ExperimentSpec, seed: u64) -> Experiment {
        Experiment { seed, spec }
    }

    #[test]
    fn fmt_sig6_cases() {
        assert_eq!(fmt_sig6(110.762), "110.762");
        assert_eq!(fmt_sig6(0.0123456), "0.0123456");
        assert_eq!(fmt_sig6(1.0), "1.00000");
        assert_eq!(fmt_sig6(0.0), "0.00000");
        assert_eq!(fmt_sig6(237.74), "237.740");
        assert_eq!(fmt_sig6(f64::INFINITY), "inf");
    }

    #[test]
    fn empty_table_renders_header_only() {
        let t = ResultTable {
            kind: "power-report",
            columns: vec!["a", "b"],
            rows: vec![],
        };
        assert_eq!(t.to_csv(), "a,b\n");
    }

    #[test]
    fn stride_sweep_schema_and_determinism() {
        let e = experiment(
            ExperimentSpec::StrideSweep {
                strides: vec![1, 16],
                rounds: 4,
                access_bytes: 8,
            },
            7,
        );
        let c = cfg();
        let t1 = run_experiment(&c, &e).unwrap();
        let t2 = run_experiment(&c, &e).unwrap();
        assert_eq!(
            t1.columns,
            vec![
                "stride",
                "config",
                "l1_miss_ratio",
                "llc_miss_ratio",
                "cycles"
            ]
        );
        assert_eq!(t1.rows.len(), 2 * 4);
        assert_eq!(t1.to_csv(), t2.to_csv());
    }

    #[test]
    fn parallel_and_sequential_runs_are_byte_identical() {
        let c = cfg();
        let experiments = [
            experiment(
                ExperimentSpec::StrideSweep {
                    strides: vec![1, 8],
                    rounds: 4,
                    access_bytes: 8,
                },
                3,
            ),
            experiment(
                ExperimentSpec::LlcCompare {
                    trace_file: None,
                    synthetic: Some(SyntheticTraceSpec {
                        accesses: 5_000,
                        warmup_accesses: 1_000,
                        ..Default::default()
                    }),
                },
                42,
            ),
            experiment(
                ExperimentSpec::CcrEfficiency {
                    ccr_targets: vec![2.0, 0.5],
                    traffic: CcrTraffic::default(),
                },
                0,
            ),
        ];
        for e in &experiments {
            let par = run_experiment(&c, e).unwrap();
            let seq = run_experiment_sequential(&c, e).unwrap();
            assert_eq!(par.to_csv(), seq.to_csv(), "{}", e.kind_label());
        }
    }

    #[test]
    fn llc_compare_requires_a_trace() {
        let e = experiment(
            ExperimentSpec::LlcCompare {
                trace_file: None,
                synthetic: None,
            },
            0,
        );
        assert!(matches!(
            run_experiment(&cfg(), &e),
            Err(ExperimentError::MissingTrace)
        ));
    }

    #[test]
    fn unknown_kernel_is_an_error() {
        let e = experiment(
            ExperimentSpec::PmcaSpeedup {
                kernels: Some(vec!["nope".into()]),
                invocations: vec![1],
            },
            0,
        );
        assert!(matches!(
            run_experiment(&cfg(), &e),
            Err(ExperimentError::UnknownKernel(_))
        ));
    }

    #[test]
    fn power_report_totals() {
        let e = experiment(ExperimentSpec::PowerReport {}, 0);
        let t = run_experiment(&cfg(), &e).unwrap();
        assert_eq!(t.rows.len(), 5);
        let total = t.rows.last().unwrap();
        assert_eq!(total[0], Cell::Str("total".into()));
        match total[4] {
            Cell::Float(v) => assert!((v - 237.41).abs() / 237.41 < 0.015),
            _ => panic!("total power must be a float"),
        }
    }

    #[test]
    fn experiment_document_roundtrip() {
        let text = r#"{ "kind": "stride-sweep", "seed": 9, "strides": [1, 2], "rounds": 5 }"#;
        let e = load_experiment(text).unwrap();
        assert_eq!(e.seed, 9);
        match &e.spec {
            ExperimentSpec::StrideSweep {
                strides,
                rounds,
                access_bytes,
            } => {
                assert_eq!(strides, &vec![1, 2]);
                assert_eq!(*rounds, 5);
                assert_eq!(*access_bytes, 8);
            }
            other => panic!("wrong kind: {other:?}"),
        }
        let again = load_experiment(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn csv_parses_back_to_the_same_aggregates() {
        let e = experiment(
            ExperimentSpec::LlcCompare {
                trace_file: None,
                synthetic: Some(SyntheticTraceSpec {
                    accesses: 3_000,
                    warmup_accesses: 500,
                    ..Default::default()
                }),
            },
            5,
        );
        let t = run_experiment(&cfg(), &e).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let cyc_idx = header.iter().position(|c| *c == "cycles").unwrap();
        let rec_idx = header.iter().position(|c| *c == "records").unwrap();
        for (line, row) in lines.zip(&t.rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(
                fields[cyc_idx].parse::<u64>().unwrap(),
                match row[cyc_idx] {
                    Cell::Int(v) => v,
                    _ => unreachable!(),
                }
            );
            assert_eq!(fields[rec_idx], "3000");
        }
    }
}
