//! Main-memory backends: the HyperRAM controller model (chip-select address
//! mapping, optional dual-bus 16-bit interleaving, burst timing) and an ideal
//! DDR4/LPDDR4 backend used as the comparison point.
//!
//! All backend timing is deterministic. Hyper timing is expressed in bus
//! cycles and converted to SoC cycles by the configured frequency ratio,
//! rounding up. Addresses handled here are relative to the start of the DRAM
//! region; callers rebase absolute addresses first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest capacity of a single HyperRAM device.
pub const MAX_BYTES_PER_CS: u64 = 64 * 1024 * 1024;

/// Highest supported HyperBUS clock.
pub const MAX_BUS_FREQ_MHZ: f64 = 200.0;

#[derive(Debug, Error, PartialEq)]
pub enum MemError {
    #[error("address {addr:#x} (+{len} bytes) outside capacity {capacity:#x}")]
    OutOfRange { addr: u64, len: u64, capacity: u64 },
    #[error("transaction at {addr:#x} len {len} crosses a device boundary (chunk {chunk:#x})")]
    CrossesDeviceBoundary { addr: u64, len: u64, chunk: u64 },
    #[error("transaction length must be > 0")]
    ZeroLength,
    #[error("2D burst stride {stride} shorter than line length {len}")]
    StrideTooShort { stride: u64, len: u64 },
    #[error("2D burst count must be >= 1")]
    ZeroCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxnKind {
    Read,
    Write,
}

/// Who issued a transaction; carried through for traffic accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initiator {
    Host,
    Llc,
    PmcaDma,
    Udma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Burst2d {
    /// Number of lines in the burst.
    pub count: u64,
    /// Distance between consecutive line start addresses, in bytes.
    pub stride_bytes: u64,
}

/// A single memory transaction. `len_bytes` is the per-line payload; a 2D
/// burst repeats it `count` times at `stride_bytes` spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemTxn {
    pub kind: TxnKind,
    pub addr: u64,
    pub len_bytes: u64,
    pub burst2d: Option<Burst2d>,
    pub source: Initiator,
}

impl MemTxn {
    pub fn new(
        kind: TxnKind,
        addr: u64,
        len_bytes: u64,
        source: Initiator,
    ) -> Result<Self, MemError> {
        if len_bytes == 0 {
            return Err(MemError::ZeroLength);
        }
        Ok(Self {
            kind,
            addr,
            len_bytes,
            burst2d: None,
            source,
        })
    }

    pub fn new_2d(
        kind: TxnKind,
        addr: u64,
        len_bytes: u64,
        count: u64,
        stride_bytes: u64,
        source: Initiator,
    ) -> Result<Self, MemError> {
        if len_bytes == 0 {
            return Err(MemError::ZeroLength);
        }
        if count == 0 {
            return Err(MemError::ZeroCount);
        }
        if stride_bytes < len_bytes {
            return Err(MemError::StrideTooShort {
                stride: stride_bytes,
                len: len_bytes,
            });
        }
        Ok(Self {
            kind,
            addr,
            len_bytes,
            burst2d: Some(Burst2d {
                count,
                stride_bytes,
            }),
            source,
        })
    }

    pub fn read(addr: u64, len_bytes: u64, source: Initiator) -> Self {
        Self::new(TxnKind::Read, addr, len_bytes, source).expect("read txn")
    }

    pub fn write(addr: u64, len_bytes: u64, source: Initiator) -> Self {
        Self::new(TxnKind::Write, addr, len_bytes, source).expect("write txn")
    }

    /// Total payload over all lines of the burst.
    pub fn total_bytes(&self) -> u64 {
        match self.burst2d {
            Some(b) => b.count * self.len_bytes,
            None => self.len_bytes,
        }
    }

    /// Same transaction rebased by `-base` (absolute -> DRAM-relative).
    pub fn rebased(&self, base: u64) -> Self {
        Self {
            addr: self.addr - base,
            ..*self
        }
    }
}

/// HyperBUS topology and timing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperConfig {
    /// Chip selects per bus.
    pub n_cs: u64,
    /// 1 or 2 buses; with 2, devices pair up and interleave at 16-bit blocks.
    pub n_buses: u64,
    pub mem_bytes_per_cs: u64,
    pub bus_freq_mhz: f64,
    /// Initial access latency charged once per bus transaction.
    pub t_init_bus_cycles: u64,
    /// Active power of the whole HyperRAM device population.
    pub device_power_mw: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        Self {
            n_cs: 4,
            n_buses: 2,
            mem_bytes_per_cs: MAX_BYTES_PER_CS,
            bus_freq_mhz: MAX_BUS_FREQ_MHZ,
            t_init_bus_cycles: 7,
            device_power_mw: 25.0,
        }
    }
}

impl HyperConfig {
    pub fn total_capacity_bytes(&self) -> u64 {
        self.n_cs * self.n_buses * self.mem_bytes_per_cs
    }

    /// HyperBUS pin count for one bus: 3 control + n CS + 8 DDR data pins.
    pub fn pins_per_bus(&self) -> u64 {
        11 + self.n_cs
    }

    pub fn total_pins(&self) -> u64 {
        self.n_buses * self.pins_per_bus()
    }

    /// Address span owned by one chip select: one device on a single bus,
    /// a device pair on a dual bus.
    pub fn cs_span_bytes(&self) -> u64 {
        self.n_buses * self.mem_bytes_per_cs
    }
}

/// Ideal DDR-class backend: fixed latency plus a flat bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdrConfig {
    pub fixed_latency_soc_cycles: u64,
    pub bytes_per_soc_cycle: f64,
    /// Controller + PHY + device power. `None` asks the config loader to
    /// derive the calibrated default; see `SocConfig::apply_defaults`.
    pub subsystem_power_mw: Option<f64>,
}

impl Default for DdrConfig {
    fn default() -> Self {
        Self {
            fixed_latency_soc_cycles: 10,
            bytes_per_soc_cycle: 8.0,
            subsystem_power_mw: None,
        }
    }
}

/// Where a DRAM-relative byte lives in the device population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceLocation {
    pub bus_id: u64,
    pub cs_id: u64,
    pub device_addr: u64,
}

/// Map a DRAM-relative address onto (bus, chip select, device offset).
///
/// Single bus: chip selects are stacked contiguously. Dual bus: the two
/// devices sharing a chip select interleave at 16-bit granularity, so even
/// 16-bit blocks land on bus 0 and odd blocks on bus 1.
pub fn map_address(cfg: &HyperConfig, addr: u64) -> Result<DeviceLocation, MemError> {
    if addr >= cfg.total_capacity_bytes() {
        return Err(MemError::OutOfRange {
            addr,
            len: 1,
            capacity: cfg.total_capacity_bytes(),
        });
    }
    if cfg.n_buses == 1 {
        Ok(DeviceLocation {
            bus_id: 0,
            cs_id: addr / cfg.mem_bytes_per_cs,
            device_addr: addr % cfg.mem_bytes_per_cs,
        })
    } else {
        let pair = cfg.cs_span_bytes();
        let cs_id = addr / pair;
        let p = addr % pair;
        let b = p / 2;
        Ok(DeviceLocation {
            bus_id: b % 2,
            cs_id,
            device_addr: (b / 2) * 2 + (p % 2),
        })
    }
}

/// Closed-form inverse of `map_address`.
pub fn unmap_location(cfg: &HyperConfig, loc: &DeviceLocation) -> u64 {
    if cfg.n_buses == 1 {
        loc.cs_id * cfg.mem_bytes_per_cs + loc.device_addr
    } else {
        let b = (loc.device_addr / 2) * 2 + loc.bus_id;
        let p = b * 2 + loc.device_addr % 2;
        loc.cs_id * cfg.cs_span_bytes() + p
    }
}

/// Bytes of `[addr, addr+len)` carried by each bus under 16-bit interleaving.
///
/// The pattern has period 4: bytes {0,1} of each 4-byte group go to bus 0,
/// bytes {2,3} to bus 1. Chip-select spans are 4-aligned, so the global
/// address can be used directly.
pub fn bytes_per_bus(cfg: &HyperConfig, addr: u64, len: u64) -> [u64; 2] {
    if cfg.n_buses == 1 {
        return [len, 0];
    }
    // count of i in [0, n) with (i / 2) % 2 == 0
    fn bus0_below(n: u64) -> u64 {
        2 * (n / 4) + (n % 4).min(2)
    }
    let bus0 = bus0_below(addr + len) - bus0_below(addr);
    [bus0, len - bus0]
}

/// Bus cycles for a 1D transaction that stays within one chip-select span.
///
/// Timing model: one initial-access latency, then double-data-rate transfer
/// at 2 bytes per bus cycle per bus. On dual-bus configs both buses run in
/// parallel and the slower one bounds the transaction.
pub fn hyper_access_cycles(cfg: &HyperConfig, txn: &MemTxn) -> Result<u64, MemError> {
    debug_assert!(txn.burst2d.is_none(), "expand 2D bursts before timing");
    let capacity = cfg.total_capacity_bytes();
    if txn.addr >= capacity || txn.addr + txn.len_bytes > capacity {
        return Err(MemError::OutOfRange {
            addr: txn.addr,
            len: txn.len_bytes,
            capacity,
        });
    }
    let chunk = cfg.cs_span_bytes();
    if txn.addr / chunk != (txn.addr + txn.len_bytes - 1) / chunk {
        return Err(MemError::CrossesDeviceBoundary {
            addr: txn.addr,
            len: txn.len_bytes,
            chunk,
        });
    }
    let loads = bytes_per_bus(cfg, txn.addr, txn.len_bytes);
    let busiest = loads.iter().copied().max().unwrap();
    Ok(cfg.t_init_bus_cycles + busiest.div_ceil(2))
}

/// SoC cycles for a transaction on the ideal DDR backend.
pub fn ddr_access_cycles(cfg: &DdrConfig, txn: &MemTxn) -> u64 {
    debug_assert!(txn.burst2d.is_none(), "expand 2D bursts before timing");
    cfg.fixed_latency_soc_cycles + (txn.len_bytes as f64 / cfg.bytes_per_soc_cycle).ceil() as u64
}

/// Expand a 2D burst into its ordered 1D lines. A plain 1D transaction
/// expands to itself.
pub fn dma_expand_2d(txn: &MemTxn) -> Vec<MemTxn> {
    match txn.burst2d {
        None => vec![*txn],
        Some(b) => (0..b.count)
            .map(|i| MemTxn {
                kind: txn.kind,
                addr: txn.addr + i * b.stride_bytes,
                len_bytes: txn.len_bytes,
                burst2d: None,
                source: txn.source,
            })
            .collect(),
    }
}

/// Split a 1D transaction at chip-select span boundaries, preserving order.
pub fn split_at_device_boundaries(cfg: &HyperConfig, txn: &MemTxn) -> Vec<MemTxn> {
    debug_assert!(txn.burst2d.is_none());
    let chunk = cfg.cs_span_bytes();
    let mut pieces = Vec::new();
    let mut addr = txn.addr;
    let mut remaining = txn.len_bytes;
    while remaining > 0 {
        let room = chunk - addr % chunk;
        let take = room.min(remaining);
        pieces.push(MemTxn {
            addr,
            len_bytes: take,
            burst2d: None,
            ..*txn
        });
        addr += take;
        remaining -= take;
    }
    pieces
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Hyper,
    Ddr,
}

/// Anything that can time a transaction in SoC cycles.
pub trait MemTiming {
    fn access_soc_cycles(&self, txn: &MemTxn) -> Result<u64, MemError>;
}

/// A concrete backend instance bound to its clocking.
#[derive(Debug, Clone)]
pub enum Backend {
    Hyper { cfg: HyperConfig, soc_freq_mhz: f64 },
    Ddr { cfg: DdrConfig },
}

impl Backend {
    pub fn hyper(cfg: HyperConfig, soc_freq_mhz: f64) -> Self {
        Backend::Hyper { cfg, soc_freq_mhz }
    }

    pub fn ddr(cfg: DdrConfig) -> Self {
        Backend::Ddr { cfg }
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            Backend::Hyper { .. } => BackendKind::Hyper,
            Backend::Ddr { .. } => BackendKind::Ddr,
        }
    }

    pub fn device_power_mw(&self) -> f64 {
        match self {
            Backend::Hyper { cfg, .. } => cfg.device_power_mw,
            Backend::Ddr { cfg } => cfg.subsystem_power_mw.unwrap_or(0.0),
        }
    }
}

impl MemTiming for Backend {
    /// Time a (possibly 2D) transaction. The AXI front-end serializes: lines
    /// and split pieces are timed back to back with no overlap between them.
    fn access_soc_cycles(&self, txn: &MemTxn) -> Result<u64, MemError> {
        let lines = dma_expand_2d(txn);
        match self {
            Backend::Hyper { cfg, soc_freq_mhz } => {
                let mut bus_cycles = 0u64;
                for line in &lines {
                    for piece in split_at_device_boundaries(cfg, line) {
                        bus_cycles += hyper_access_cycles(cfg, &piece)?;
                    }
                }
                Ok(bus_to_soc_cycles(
                    bus_cycles,
                    cfg.bus_freq_mhz,
                    *soc_freq_mhz,
                ))
            }
            Backend::Ddr { cfg } => Ok(lines.iter().map(|l| ddr_access_cycles(cfg, l)).sum()),
        }
    }
}

/// Convert bus-domain cycles to SoC-domain cycles, rounding up.
pub fn bus_to_soc_cycles(bus_cycles: u64, bus_freq_mhz: f64, soc_freq_mhz: f64) -> u64 {
    (bus_cycles as f64 * soc_freq_mhz / bus_freq_mhz).ceil() as u64
}
