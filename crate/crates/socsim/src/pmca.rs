//! Analytic model of the 8-core accelerator cluster: tiled, double-buffered
//! kernel execution, lazy code-load offload overhead, and speedup versus the
//! host core.
//!
//! The cluster is modeled as a calibrated throughput (ops per cluster cycle
//! per kernel), not instruction by instruction. Data moves through the
//! memory backend in tile-sized DMA bursts; with double buffering an
//! invocation is bounded by max(compute, transfer) plus one pipeline fill
//! (first tile in) and one drain (last tile out).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ClockSet, DomainName};
use crate::mem::{Backend, Initiator, MemError, MemTiming, MemTxn, TxnKind};

/// Cluster scratchpad capacity; tiles must fit.
pub const L1SPM_BYTES: u64 = 128 * 1024;

/// An offloadable workload and its calibrated throughputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDescriptor {
    pub name: String,
    /// Operations per invocation (multiply-accumulate counts as two).
    pub total_ops: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub host_ops_per_cycle: f64,
    /// Aggregate cluster throughput over all cores.
    pub pmca_ops_per_cycle: f64,
    /// Offload image loaded once into the L2 scratchpad at first invocation.
    pub code_size_bytes: u64,
    #[serde(default = "one")]
    pub invocations: u64,
    pub tile_bytes: u64,
}

fn one() -> u64 {
    1
}

impl KernelDescriptor {
    pub fn with_invocations(&self, invocations: u64) -> Self {
        Self {
            invocations,
            ..self.clone()
        }
    }

    /// Compute throughput in GOps at a given cluster frequency.
    pub fn pmca_gops(&self, cluster_freq_mhz: f64) -> f64 {
        self.pmca_ops_per_cycle * cluster_freq_mhz / 1000.0
    }

    pub fn host_gops(&self, host_freq_mhz: f64) -> f64 {
        self.host_ops_per_cycle * host_freq_mhz / 1000.0
    }
}

/// Kernel catalog plus the global offload handshake cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationTable {
    /// Mailbox/driver handshake, in host-core cycles, charged per offload.
    pub offload_fixed_host_cycles: f64,
    pub kernels: Vec<KernelDescriptor>,
}

impl Default for CalibrationTable {
    fn default() -> Self {
        Self {
            offload_fixed_host_cycles: 5_000.0,
            kernels: default_kernel_catalog(),
        }
    }
}

impl CalibrationTable {
    pub fn kernel(&self, name: &str) -> Option<&KernelDescriptor> {
        self.kernels.iter().find(|k| k.name == name)
    }

    pub fn validate(&self, report: &mut dyn FnMut(&str, String)) {
        if self.offload_fixed_host_cycles < 0.0 {
            report(
                "calibration.offload_fixed_host_cycles",
                "must be >= 0".into(),
            );
        }
        if self.kernel("matmul-int8").is_none() {
            report(
                "calibration.kernels",
                "the matmul-int8 calibration entry is required".into(),
            );
        }
        for (i, k) in self.kernels.iter().enumerate() {
            let path = format!("calibration.kernels[{i}]");
            if self.kernels.iter().filter(|q| q.name == k.name).count() > 1 {
                report(&path, format!("duplicate kernel name {}", k.name));
            }
            if k.host_ops_per_cycle.is_nan() || k.host_ops_per_cycle <= 0.0 {
                report(&format!("{path}.host_ops_per_cycle"), "must be > 0".into());
            }
            if k.pmca_ops_per_cycle.is_nan() || k.pmca_ops_per_cycle <= 0.0 {
                report(&format!("{path}.pmca_ops_per_cycle"), "must be > 0".into());
            }
            if k.tile_bytes == 0 || k.tile_bytes > L1SPM_BYTES {
                report(
                    &format!("{path}.tile_bytes"),
                    format!("must be in 1..={L1SPM_BYTES}"),
                );
            }
            if k.invocations == 0 {
                report(&format!("{path}.invocations"), "must be >= 1".into());
            }
            if k.total_ops == 0 {
                report(&format!("{path}.total_ops"), "must be >= 1".into());
            }
        }
    }
}

/// Shipped calibration. Throughputs are ops/cycle measured figures:
/// matmul-int8 uses the 4x int8 SIMD MAC path (13.8 GOps at 400 MHz),
/// fp16 gets 2x SIMD, fp32 runs one FMA lane per core. Host figures are for
/// the scalar in-order core. Offload images are a few hundred KiB because
/// the lazily loaded binary carries the cluster runtime alongside the
/// kernel.
pub fn default_kernel_catalog() -> Vec<KernelDescriptor> {
    vec![
        KernelDescriptor {
            name: "matmul-int8".into(),
            total_ops: 4_194_304, // 128x128x128, MAC = 2 ops
            bytes_in: 32_768,
            bytes_out: 16_384,
            host_ops_per_cycle: 0.25883,
            pmca_ops_per_cycle: 34.5,
            code_size_bytes: 262_144,
            invocations: 1,
            tile_bytes: 32_768,
        },
        KernelDescriptor {
            name: "matmul-fp16".into(),
            total_ops: 524_288, // 64x64x64
            bytes_in: 16_384,
            bytes_out: 8_192,
            host_ops_per_cycle: 0.8,
            pmca_ops_per_cycle: 12.0,
            code_size_bytes: 262_144,
            invocations: 1,
            tile_bytes: 16_384,
        },
        KernelDescriptor {
            name: "dsp-fp32".into(),
            total_ops: 262_144, // 256-tap FIR over 512 samples
            bytes_in: 3_072,
            bytes_out: 2_048,
            host_ops_per_cycle: 0.6,
            pmca_ops_per_cycle: 6.0,
            code_size_bytes: 262_144,
            invocations: 1,
            tile_bytes: 16_384,
        },
    ]
}

/// DRAM-relative placement of the kernel's working buffers and code image:
/// input at 0, output right after, code after that. Timing-only; the layout
/// just has to stay inside capacity and device-boundary splits are handled
/// by the backend.
pub fn kernel_buffer_layout(k: &KernelDescriptor) -> (u64, u64, u64) {
    (0, k.bytes_in, k.bytes_in + k.bytes_out)
}

/// The per-invocation DMA burst list: tile-sized 1D reads over the input
/// buffer, then tile-sized writes over the output buffer.
pub fn tiled_stream_txns(k: &KernelDescriptor) -> Vec<MemTxn> {
    let (in_base, out_base, _) = kernel_buffer_layout(k);
    let mut txns = Vec::new();
    let mut push_stream = |kind: TxnKind, base: u64, bytes: u64| {
        let mut off = 0;
        while off < bytes {
            let len = k.tile_bytes.min(bytes - off);
            txns.push(MemTxn {
                kind,
                addr: base + off,
                len_bytes: len,
                burst2d: None,
                source: Initiator::PmcaDma,
            });
            off += len;
        }
    };
    push_stream(TxnKind::Read, in_base, k.bytes_in);
    push_stream(TxnKind::Write, out_base, k.bytes_out);
    txns
}

/// Sum of backend times for a burst list, in SoC cycles.
pub fn stream_soc_cycles(backend: &Backend, txns: &[MemTxn]) -> Result<u64, MemError> {
    let mut total = 0;
    for t in txns {
        total += backend.access_soc_cycles(t)?;
    }
    Ok(total)
}

/// Timing breakdown of one kernel run (all figures in cluster cycles unless
/// suffixed otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct PmcaRun {
    pub t_compute: f64,
    pub t_mem: f64,
    pub prologue: f64,
    pub epilogue: f64,
    pub invocation_cycles: f64,
    pub total_cycles: f64,
    /// DMA bursts issued per invocation; covers bytes_in + bytes_out exactly.
    pub mem_txns: Vec<MemTxn>,
}

#[derive(Debug, Error)]
pub enum PmcaError {
    #[error("tile_bytes must be > 0")]
    ZeroTile,
    #[error(transparent)]
    Mem(#[from] MemError),
}

fn soc_to_cluster(soc_cycles: u64, clocks: &ClockSet) -> f64 {
    soc_cycles as f64 * clocks.cluster.freq_mhz / clocks.host_domain.freq_mhz
}

/// Tiled double-buffered execution time of one kernel.
///
/// Per invocation: compute takes total_ops / pmca_ops_per_cycle, transfer
/// streams bytes_in + bytes_out through the backend in tile bursts, and the
/// two overlap except for the first tile load and last tile store.
pub fn pmca_exec_cycles(
    k: &KernelDescriptor,
    backend: &Backend,
    clocks: &ClockSet,
) -> Result<PmcaRun, PmcaError> {
    if k.tile_bytes == 0 {
        return Err(PmcaError::ZeroTile);
    }
    let t_compute = k.total_ops as f64 / k.pmca_ops_per_cycle;
    let txns = tiled_stream_txns(k);
    let t_mem = soc_to_cluster(stream_soc_cycles(backend, &txns)?, clocks);

    let (in_base, out_base, _) = kernel_buffer_layout(k);
    let first_in = k.tile_bytes.min(k.bytes_in);
    let last_out = k.tile_bytes.min(k.bytes_out);
    let prologue = if first_in == 0 {
        0.0
    } else {
        soc_to_cluster(
            backend.access_soc_cycles(&MemTxn::read(in_base, first_in, Initiator::PmcaDma))?,
            clocks,
        )
    };
    let epilogue = if last_out == 0 {
        0.0
    } else {
        soc_to_cluster(
            backend.access_soc_cycles(&MemTxn::write(
                out_base + k.bytes_out - last_out,
                last_out,
                Initiator::PmcaDma,
            ))?,
            clocks,
        )
    };

    let invocation_cycles = t_compute.max(t_mem) + prologue + epilogue;
    Ok(PmcaRun {
        t_compute,
        t_mem,
        prologue,
        epilogue,
        invocation_cycles,
        total_cycles: invocation_cycles * k.invocations as f64,
        mem_txns: txns,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffloadRun {
    /// Mailbox/driver handshake, converted to cluster cycles.
    pub handshake_cycles: f64,
    /// Lazy load of the code image from main memory, charged once.
    pub code_load_cycles: f64,
    /// handshake + code load.
    pub overhead_cycles: f64,
    pub total_cycles: f64,
    pub exec: PmcaRun,
}

/// Full offload cost: fixed handshake plus reading the code image from main
/// memory once (lazy load at first invocation), then the kernel executions.
pub fn offload_total_cycles(
    k: &KernelDescriptor,
    offload_fixed_host_cycles: f64,
    backend: &Backend,
    clocks: &ClockSet,
) -> Result<OffloadRun, PmcaError> {
    let exec = pmca_exec_cycles(k, backend, clocks)?;
    let handshake_cycles =
        offload_fixed_host_cycles * clocks.cluster.freq_mhz / clocks.host_core.freq_mhz;
    let code_load_cycles = if k.code_size_bytes == 0 {
        0.0
    } else {
        let (_, _, code_base) = kernel_buffer_layout(k);
        let txn = MemTxn::read(code_base, k.code_size_bytes, Initiator::Udma);
        soc_to_cluster(backend.access_soc_cycles(&txn)?, clocks)
    };
    let overhead_cycles = handshake_cycles + code_load_cycles;
    Ok(OffloadRun {
        handshake_cycles,
        code_load_cycles,
        overhead_cycles,
        total_cycles: overhead_cycles + exec.total_cycles,
        exec,
    })
}

/// Host-side cycle count for the same work: a pure throughput model on the
/// host core's own clock domain.
pub fn host_cycles(k: &KernelDescriptor) -> f64 {
    k.invocations as f64 * k.total_ops as f64 / k.host_ops_per_cycle
}

/// Cycle-count speedup of offloading versus running on the host, both sides
/// counted in their own clock domain.
pub fn speedup_vs_host(
    k: &KernelDescriptor,
    offload_fixed_host_cycles: f64,
    backend: &Backend,
    clocks: &ClockSet,
) -> Result<f64, PmcaError> {
    let off = offload_total_cycles(k, offload_fixed_host_cycles, backend, clocks)?;
    Ok(host_cycles(k) / off.total_cycles)
}

impl ClockSet {
    /// Frequency of the domain a figure is expressed in.
    pub fn freq_of(&self, name: DomainName) -> f64 {
        self.domain(name).freq_mhz
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mem::HyperConfig;

    fn clocks() -> ClockSet {
        ClockSet::default()
    }

    fn hyper_backend() -> Backend {
        Backend::hyper(HyperConfig::default(), clocks().host_domain.freq_mhz)
    }

    fn kernel(name: &str) -> KernelDescriptor {
        CalibrationTable::default().kernel(name).unwrap().clone()
    }

    #[test]
    fn pure_compute_kernel_runs_at_compute_time() {
        let k = KernelDescriptor {
            name: "synthetic".into(),
            total_ops: 1_000_000,
            bytes_in: 0,
            bytes_out: 0,
            host_ops_per_cycle: 1.0,
            pmca_ops_per_cycle: 10.0,
            code_size_bytes: 0,
            invocations: 1,
            tile_bytes: 1024,
        };
        let run = pmca_exec_cycles(&k, &hyper_backend(), &clocks()).unwrap();
        assert_eq!(run.invocation_cycles, 100_000.0);
        assert_eq!(run.t_mem, 0.0);
        assert!(run.mem_txns.is_empty());
    }

    #[test]
    fn bandwidth_bound_kernel_is_transfer_limited() {
        let k = KernelDescriptor {
            name: "streaming".into(),
            total_ops: 100,
            bytes_in: 1 << 20,
            bytes_out: 1 << 20,
            host_ops_per_cycle: 1.0,
            pmca_ops_per_cycle: 10.0,
            code_size_bytes: 0,
            invocations: 1,
            tile_bytes: 16_384,
        };
        let run = pmca_exec_cycles(&k, &hyper_backend(), &clocks()).unwrap();
        assert!(run.t_mem > 100.0 * run.t_compute);
        assert_eq!(
            run.invocation_cycles,
            run.t_mem + run.prologue + run.epilogue
        );
    }

    #[test]
    fn matmul_int8_calibration_gives_13_8_gops() {
        let k = kernel("matmul-int8");
        assert_eq!(k.pmca_gops(400.0), 13.8);
        // and the shipped kernels are all compute-bound on the default backend
        for name in ["matmul-int8", "matmul-fp16", "dsp-fp32"] {
            let run = pmca_exec_cycles(&kernel(name), &hyper_backend(), &clocks()).unwrap();
            assert!(run.t_compute > run.t_mem, "{name} should be compute-bound");
        }
    }

    #[test]
    fn overhead_is_charged_exactly_once() {
        let k = kernel("matmul-fp16");
        let once =
            offload_total_cycles(&k.with_invocations(1), 5_000.0, &hyper_backend(), &clocks())
                .unwrap();
        let thousand = offload_total_cycles(
            &k.with_invocations(1000),
            5_000.0,
            &hyper_backend(),
            &clocks(),
        )
        .unwrap();
        assert_eq!(once.overhead_cycles, thousand.overhead_cycles);
        let inv = once.exec.invocation_cycles;
        assert!((thousand.total_cycles - (once.overhead_cycles + 1000.0 * inv)).abs() < 1e-6);
        // amortized to a negligible fraction
        assert!(
            thousand.overhead_cycles / thousand.total_cycles
                < thousand.overhead_cycles / (1000.0 * inv)
        );
    }

    #[test]
    fn zero_code_zero_handshake_is_pure_execution() {
        let mut k = kernel("dsp-fp32");
        k.code_size_bytes = 0;
        let off = offload_total_cycles(&k, 0.0, &hyper_backend(), &clocks()).unwrap();
        assert_eq!(off.overhead_cycles, 0.0);
        assert_eq!(off.total_cycles, off.exec.total_cycles);
    }

    #[test]
    fn symmetric_throughput_no_overhead_gives_unit_speedup() {
        let k = KernelDescriptor {
            name: "mirror".into(),
            total_ops: 123_456,
            bytes_in: 0,
            bytes_out: 0,
            host_ops_per_cycle: 3.0,
            pmca_ops_per_cycle: 3.0,
            code_size_bytes: 0,
            invocations: 7,
            tile_bytes: 1024,
        };
        let s = speedup_vs_host(&k, 0.0, &hyper_backend(), &clocks()).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speedup_monotone_in_invocations() {
        let k = kernel("matmul-int8");
        let mut prev = 0.0;
        for n in [1, 2, 5, 10, 100, 1000, 10_000] {
            let s = speedup_vs_host(&k.with_invocations(n), 5_000.0, &hyper_backend(), &clocks())
                .unwrap();
            assert!(s >= prev, "speedup dipped at {n} invocations");
            prev = s;
        }
    }

    #[test]
    fn dma_traffic_is_conserved() {
        let k = kernel("matmul-int8").with_invocations(13);
        let run = pmca_exec_cycles(&k, &hyper_backend(), &clocks()).unwrap();
        let per_invocation: u64 = run.mem_txns.iter().map(|t| t.total_bytes()).sum();
        assert_eq!(per_invocation, k.bytes_in + k.bytes_out);
        assert_eq!(
            per_invocation * k.invocations,
            13 * (k.bytes_in + k.bytes_out)
        );
        let reads: u64 = run
            .mem_txns
            .iter()
            .filter(|t| t.kind == TxnKind::Read)
            .map(|t| t.total_bytes())
            .sum();
        assert_eq!(reads, k.bytes_in);
    }

    #[test]
    fn invocation_time_never_below_both_bounds() {
        for name in ["matmul-int8", "matmul-fp16", "dsp-fp32"] {
            let run = pmca_exec_cycles(&kernel(name), &hyper_backend(), &clocks()).unwrap();
            assert!(run.invocation_cycles >= run.t_compute.max(run.t_mem));
        }
    }

    #[test]
    fn doubling_compute_throughput_never_hurts() {
        let base = KernelDescriptor {
            name: "streaming".into(),
            total_ops: 10_000,
            bytes_in: 1 << 20,
            bytes_out: 1 << 20,
            host_ops_per_cycle: 1.0,
            pmca_ops_per_cycle: 4.0,
            code_size_bytes: 0,
            invocations: 1,
            tile_bytes: 16_384,
        };
        let mut faster = base.clone();
        faster.pmca_ops_per_cycle *= 2.0;
        let b = pmca_exec_cycles(&base, &hyper_backend(), &clocks()).unwrap();
        let f = pmca_exec_cycles(&faster, &hyper_backend(), &clocks()).unwrap();
        let sb = speedup_vs_host(&base, 0.0, &hyper_backend(), &clocks()).unwrap();
        let sf = speedup_vs_host(&faster, 0.0, &hyper_backend(), &clocks()).unwrap();
        assert!(sf >= sb);
        // still transfer-bound after doubling: invocation time unchanged
        assert!(f.t_mem > 2.0 * f.t_compute);
        assert_eq!(b.invocation_cycles, f.invocation_cycles);
    }

    #[test]
    fn zero_tile_rejected() {
        let mut k = kernel("matmul-int8");
        k.tile_bytes = 0;
        assert!(matches!(
            pmca_exec_cycles(&k, &hyper_backend(), &clocks()),
            Err(PmcaError::ZeroTile)
        ));
    }
}
