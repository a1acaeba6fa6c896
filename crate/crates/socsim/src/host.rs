//! Host-core memory path: the write-through L1 data cache, the synthetic
//! strided-read benchmark, the plain-text trace format, and trace replay
//! through L1 -> LLC -> backend.
//!
//! The core is in-order and blocking: one access per cycle when the L1 hits,
//! otherwise it stalls for the full downstream latency. Scratchpad accesses
//! cost one cycle and do not involve the caches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{RegionTag, SocConfig};
use crate::llc::{llc_access, LlcState, LlcStats};
use crate::mem::{Backend, Initiator, MemError, MemTiming, MemTxn, TxnKind};

/// L1 data cache geometry: 8 ways of 4 KiB, write-through, no write
/// allocate, true LRU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct L1Config {
    pub size_bytes: u64,
    pub way_bytes: u64,
    pub line_bytes: u64,
}

impl Default for L1Config {
    fn default() -> Self {
        Self {
            size_bytes: 32 * 1024,
            way_bytes: 4 * 1024,
            line_bytes: 64,
        }
    }
}

impl L1Config {
    pub fn ways(&self) -> u64 {
        self.size_bytes / self.way_bytes
    }

    pub fn sets(&self) -> u64 {
        self.way_bytes / self.line_bytes
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct L1Line {
    tag: u64,
    valid: bool,
    last_used: u64,
}

#[derive(Debug, Clone)]
pub struct L1State {
    cfg: L1Config,
    lines: Vec<L1Line>, // [set * ways + way]
    clock: u64,
}

/// Outcome of one L1 access: whether it hit, and the transaction (line fill
/// or write-through) sent downstream, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct L1Outcome {
    pub hit: bool,
    pub downstream: Option<MemTxn>,
}

impl L1State {
    pub fn new(cfg: L1Config) -> Self {
        assert!(
            cfg.line_bytes.is_power_of_two() && cfg.line_bytes >= 8,
            "L1 line size"
        );
        assert_eq!(
            cfg.way_bytes % cfg.line_bytes,
            0,
            "way must hold whole lines"
        );
        assert_eq!(
            cfg.size_bytes % cfg.way_bytes,
            0,
            "size must be ways x way_bytes"
        );
        Self {
            cfg,
            lines: vec![L1Line::default(); (cfg.sets() * cfg.ways()) as usize],
            clock: 0,
        }
    }

    pub fn config(&self) -> &L1Config {
        &self.cfg
    }

    fn set_of(&self, addr: u64) -> u64 {
        (addr / self.cfg.line_bytes) % self.cfg.sets()
    }

    fn tag_of(&self, addr: u64) -> u64 {
        addr / self.cfg.line_bytes / self.cfg.sets()
    }

    /// One access. Reads allocate on miss and fill a whole line from
    /// downstream; writes always go downstream (write-through) and never
    /// allocate, refreshing recency only when the line is resident.
    pub fn access(&mut self, rec: &TraceRecord) -> L1Outcome {
        self.clock += 1;
        let now = self.clock;
        let (set, tag) = (self.set_of(rec.addr), self.tag_of(rec.addr));
        let ways = self.cfg.ways() as usize;
        let line_bytes = self.cfg.line_bytes;
        let slot = &mut self.lines[set as usize * ways..(set as usize + 1) * ways];

        let resident = slot.iter_mut().find(|l| l.valid && l.tag == tag);
        match rec.op {
            TxnKind::Read => {
                if let Some(line) = resident {
                    line.last_used = now;
                    return L1Outcome {
                        hit: true,
                        downstream: None,
                    };
                }
                let victim = match slot.iter().position(|l| !l.valid) {
                    Some(i) => i,
                    None => slot
                        .iter()
                        .enumerate()
                        .min_by_key(|(_, l)| l.last_used)
                        .map(|(i, _)| i)
                        .unwrap(),
                };
                slot[victim] = L1Line {
                    tag,
                    valid: true,
                    last_used: now,
                };
                let line_addr = rec.addr / line_bytes * line_bytes;
                L1Outcome {
                    hit: false,
                    downstream: Some(MemTxn::read(line_addr, line_bytes, Initiator::Host)),
                }
            }
            TxnKind::Write => {
                let hit = match resident {
                    Some(line) => {
                        line.last_used = now;
                        true
                    }
                    None => false,
                };
                L1Outcome {
                    hit,
                    downstream: Some(MemTxn::write(rec.addr, rec.len_bytes, Initiator::Host)),
                }
            }
        }
    }

    pub fn is_resident(&self, addr: u64) -> bool {
        let (set, tag) = (self.set_of(addr), self.tag_of(addr));
        let ways = self.cfg.ways() as usize;
        self.lines[set as usize * ways..(set as usize + 1) * ways]
            .iter()
            .any(|l| l.valid && l.tag == tag)
    }
}

/// One replayed access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub op: TxnKind,
    pub addr: u64,
    pub len_bytes: u64,
}

pub const TRACE_ACCESS_SIZES: [u64; 4] = [1, 2, 4, 8];

impl TraceRecord {
    pub fn new(op: TxnKind, addr: u64, len_bytes: u64) -> Result<Self, TraceError> {
        if !TRACE_ACCESS_SIZES.contains(&len_bytes) {
            return Err(TraceError::BadLength(len_bytes));
        }
        Ok(Self {
            op,
            addr,
            len_bytes,
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("access length {0} not one of 1/2/4/8")]
    BadLength(u64),
    #[error("line {line}: malformed record '{text}'")]
    Malformed { line: usize, text: String },
}

/// Parse the plain-text trace format: one `R|W,<hex-address>,<len>` record
/// per line, `#` starting a comment line.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mal = || TraceError::Malformed {
            line: i + 1,
            text: raw.to_string(),
        };
        let mut parts = line.split(',').map(str::trim);
        let op = match parts.next() {
            Some("R") | Some("r") => TxnKind::Read,
            Some("W") | Some("w") => TxnKind::Write,
            _ => return Err(mal()),
        };
        let addr_s = parts.next().ok_or_else(mal)?;
        let addr_s = addr_s
            .strip_prefix("0x")
            .or_else(|| addr_s.strip_prefix("0X"))
            .unwrap_or(addr_s);
        let addr = u64::from_str_radix(addr_s, 16).map_err(|_| mal())?;
        let len: u64 = parts.next().ok_or_else(mal)?.parse().map_err(|_| mal())?;
        if parts.next().is_some() {
            return Err(mal());
        }
        out.push(TraceRecord::new(op, addr, len).map_err(|_| mal())?);
    }
    Ok(out)
}

pub fn emit_trace(records: &[TraceRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let op = if r.op == TxnKind::Read { 'R' } else { 'W' };
        s.push_str(&format!("{op},{:#x},{}\n", r.addr, r.len_bytes));
    }
    s
}

/// The strided-read benchmark: fill one 4 KiB way with sequential reads,
/// then run rounds of reads spaced `stride_s` L1 lines apart, one touch per
/// line, the same number of lines per round as the fill covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrideBenchmarkSpec {
    pub stride_s: u64,
    /// Strided rounds after the fill; the first warms up, the rest measure.
    pub rounds: u64,
    pub access_bytes: u64,
}

impl Default for StrideBenchmarkSpec {
    fn default() -> Self {
        Self {
            stride_s: 1,
            rounds: 10,
            access_bytes: 8,
        }
    }
}

pub const STRIDE_FILL_BYTES: u64 = 4096;

impl StrideBenchmarkSpec {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.stride_s < 1 || self.rounds < 3 {
            return Err(TraceError::Malformed {
                line: 0,
                text: format!(
                    "stride_s >= 1 and rounds >= 3 required, got S={} rounds={}",
                    self.stride_s, self.rounds
                ),
            });
        }
        TraceRecord::new(TxnKind::Read, 0, self.access_bytes).map(|_| ())
    }

    /// Records before the measurement region: the fill plus one warm round.
    pub fn warmup_len(&self, l1: &L1Config) -> usize {
        (STRIDE_FILL_BYTES / self.access_bytes + STRIDE_FILL_BYTES / l1.line_bytes) as usize
    }
}

/// Generate the benchmark trace starting at `base` (must be 4 KiB aligned
/// so the fill lands on one way's worth of sets).
pub fn gen_stride_trace(spec: &StrideBenchmarkSpec, l1: &L1Config, base: u64) -> Vec<TraceRecord> {
    debug_assert_eq!(base % STRIDE_FILL_BYTES, 0);
    let mut out = Vec::new();
    // phase 1: fill the way
    let mut addr = base;
    while addr < base + STRIDE_FILL_BYTES {
        out.push(TraceRecord {
            op: TxnKind::Read,
            addr,
            len_bytes: spec.access_bytes,
        });
        addr += spec.access_bytes;
    }
    // phase 2: strided rounds over the same number of lines the fill touched
    let lines_per_round = STRIDE_FILL_BYTES / l1.line_bytes;
    for _ in 0..spec.rounds {
        for i in 0..lines_per_round {
            out.push(TraceRecord {
                op: TxnKind::Read,
                addr: base + i * spec.stride_s * l1.line_bytes,
                len_bytes: spec.access_bytes,
            });
        }
    }
    out
}

/// Aggregated outcome of one replay call. Counters cover only the records
/// replayed by that call; cache state carries across calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SimResult {
    pub records: u64,
    pub soc_cycles: u64,
    pub l1_hits: u64,
    pub l1_misses: u64,
    pub llc: LlcStats,
    pub backend_read_bytes: u64,
    pub backend_write_bytes: u64,
    pub backend_txns: u64,
}

impl SimResult {
    pub fn l1_miss_ratio(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.l1_misses as f64 / (self.l1_hits + self.l1_misses) as f64
        }
    }

    pub fn llc_miss_ratio(&self) -> f64 {
        let total = self.llc.hits + self.llc.misses;
        if total == 0 {
            0.0
        } else {
            self.llc.misses as f64 / total as f64
        }
    }

    pub fn llc_hit_ratio(&self) -> f64 {
        let total = self.llc.hits + self.llc.misses;
        if total == 0 {
            0.0
        } else {
            self.llc.hits as f64 / total as f64
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("record {index}: address {addr:#x} is unmapped")]
    Unmapped { index: usize, addr: u64 },
    #[error("record {index}: {source}")]
    Backend {
        index: usize,
        #[source]
        source: MemError,
    },
}

/// Rebases absolute DRAM addresses onto the backend's own address space.
struct RebasedBackend<'a> {
    backend: &'a Backend,
    dram_base: u64,
}

impl MemTiming for RebasedBackend<'_> {
    fn access_soc_cycles(&self, txn: &MemTxn) -> Result<u64, MemError> {
        self.backend.access_soc_cycles(&txn.rebased(self.dram_base))
    }
}

/// Replay records in order, fully serialized: each record costs one issue
/// cycle plus whatever its downstream transaction takes. The L1 caches every
/// DRAM access (the core's memory attributes make DRAM cacheable); the
/// cacheable window is an LLC front-end filter, so with an LLC, L1 traffic
/// inside the window goes through it and the rest passes straight to the
/// backend.
pub fn run_trace(
    trace: &[TraceRecord],
    cfg: &SocConfig,
    l1: &mut L1State,
    mut llc: Option<&mut LlcState>,
    backend: &Backend,
) -> Result<SimResult, SimError> {
    let dram_base = cfg.dram_region().base;
    let window = cfg.cacheable_window();
    let rebased = RebasedBackend { backend, dram_base };
    let llc_stats_before = llc.as_ref().map(|s| s.stats);

    let mut res = SimResult::default();
    let account = |res: &mut SimResult, txn: &MemTxn| {
        res.backend_txns += 1;
        match txn.kind {
            TxnKind::Read => res.backend_read_bytes += txn.total_bytes(),
            TxnKind::Write => res.backend_write_bytes += txn.total_bytes(),
        }
    };

    for (index, rec) in trace.iter().enumerate() {
        res.records += 1;
        res.soc_cycles += 1; // issue
        match cfg.classify_address(rec.addr) {
            RegionTag::Unmapped => {
                return Err(SimError::Unmapped {
                    index,
                    addr: rec.addr,
                })
            }
            RegionTag::L2Spm => {} // scratchpad: single-cycle, no cache involvement
            RegionTag::DramCacheable | RegionTag::DramBypass => {
                let out = l1.access(rec);
                if out.hit {
                    res.l1_hits += 1;
                } else {
                    res.l1_misses += 1;
                }
                if let Some(txn) = out.downstream {
                    match llc.as_deref_mut() {
                        Some(state) => {
                            let access = llc_access(state, &window, &txn, &rebased)
                                .map_err(|source| SimError::Backend { index, source })?;
                            res.soc_cycles += access.soc_cycles;
                            for t in &access.backend_txns {
                                account(&mut res, t);
                            }
                        }
                        None => {
                            let cycles = rebased
                                .access_soc_cycles(&txn)
                                .map_err(|source| SimError::Backend { index, source })?;
                            res.soc_cycles += cycles;
                            account(&mut res, &txn);
                        }
                    }
                }
            }
        }
    }

    if let (Some(state), Some(before)) = (llc.as_ref(), llc_stats_before) {
        res.llc = state.stats.delta_since(&before);
    }
    Ok(res)
}
