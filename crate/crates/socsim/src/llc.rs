//! Parameterizable set-associative last-level cache: bypass filtering,
//! descriptor splitting, tag lookup with true per-set LRU, write-back /
//! write-allocate policy, and hit/miss/eviction accounting.
//!
//! Only tags and flags are tracked; the simulator models timing and traffic,
//! not memory contents. Timing: the tag SRAM answers in one cycle, then one
//! cycle per block touched; a miss first writes back the victim (if dirty)
//! and then refills the whole line through the backend, serially.

use serde::{Deserialize, Serialize};

use crate::config::Region;
use crate::mem::{Initiator, MemError, MemTiming, MemTxn, TxnKind};

/// Cache geometry. Size is `n_ways * n_lines * n_blocks * axi_dw_bits / 8`;
/// `n_lines` is the number of sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlcConfig {
    pub axi_dw_bits: u64,
    pub n_blocks: u64,
    pub n_lines: u64,
    pub n_ways: u64,
}

impl Default for LlcConfig {
    fn default() -> Self {
        Self {
            axi_dw_bits: 64,
            n_blocks: 8,
            n_lines: 256,
            n_ways: 8,
        }
    }
}

impl LlcConfig {
    pub fn block_bytes(&self) -> u64 {
        self.axi_dw_bits / 8
    }

    pub fn line_bytes(&self) -> u64 {
        self.n_blocks * self.block_bytes()
    }

    pub fn size_bytes(&self) -> u64 {
        self.n_ways * self.n_lines * self.line_bytes()
    }
}

/// One line of a cacheable transaction after splitting, with its derived
/// set index and tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineDescriptor {
    pub line_addr: u64,
    pub kind: TxnKind,
    pub set_index: u64,
    pub tag: u64,
}

impl LineDescriptor {
    pub fn new(cfg: &LlcConfig, line_addr: u64, kind: TxnKind) -> Self {
        debug_assert_eq!(line_addr % cfg.line_bytes(), 0);
        let line_no = line_addr / cfg.line_bytes();
        Self {
            line_addr,
            kind,
            set_index: line_no % cfg.n_lines,
            tag: line_no / cfg.n_lines,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Way {
    tag: u64,
    valid: bool,
    dirty: bool,
    /// Monotonic timestamp of the most recent touch; drives LRU.
    last_used: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LlcStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub writebacks: u64,
}

impl LlcStats {
    pub fn delta_since(&self, earlier: &LlcStats) -> LlcStats {
        LlcStats {
            hits: self.hits - earlier.hits,
            misses: self.misses - earlier.misses,
            evictions: self.evictions - earlier.evictions,
            writebacks: self.writebacks - earlier.writebacks,
        }
    }
}

/// Tag, flag, and recency state for the whole cache, plus counters.
#[derive(Debug, Clone)]
pub struct LlcState {
    cfg: LlcConfig,
    ways: Vec<Way>, // [set * n_ways + way]
    clock: u64,
    pub stats: LlcStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eviction {
    pub victim_addr: u64,
    pub dirty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupOutcome {
    Hit,
    Miss { eviction: Option<Eviction> },
}

/// Per-call result of `llc_access`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlcAccess {
    pub soc_cycles: u64,
    pub backend_txns: Vec<MemTxn>,
    pub hits: u64,
    pub misses: u64,
}

impl LlcState {
    pub fn new(cfg: LlcConfig) -> Self {
        let ways = vec![Way::default(); (cfg.n_lines * cfg.n_ways) as usize];
        Self {
            cfg,
            ways,
            clock: 0,
            stats: LlcStats::default(),
        }
    }

    pub fn config(&self) -> &LlcConfig {
        &self.cfg
    }

    pub fn valid_line_count(&self) -> u64 {
        self.ways.iter().filter(|w| w.valid).count() as u64
    }

    fn set_slice_mut(&mut self, set: u64) -> &mut [Way] {
        let n = self.cfg.n_ways as usize;
        let start = set as usize * n;
        &mut self.ways[start..start + n]
    }

    /// Reconstruct a victim's line address from its tag and set.
    fn line_addr_of(&self, tag: u64, set: u64) -> u64 {
        (tag * self.cfg.n_lines + set) * self.cfg.line_bytes()
    }

    /// Tag lookup plus state update for one descriptor. A hit refreshes
    /// recency; a miss installs the tag in an invalid way if one exists,
    /// otherwise the LRU-oldest way, reporting the victim. Write descriptors
    /// dirty the line either way (write-back, write-allocate).
    pub fn lookup_and_update(&mut self, d: &LineDescriptor) -> LookupOutcome {
        self.clock += 1;
        let now = self.clock;
        let set = self.set_slice_mut(d.set_index);

        if let Some(way) = set.iter_mut().find(|w| w.valid && w.tag == d.tag) {
            way.last_used = now;
            if d.kind == TxnKind::Write {
                way.dirty = true;
            }
            self.stats.hits += 1;
            return LookupOutcome::Hit;
        }

        // invalid way preferred (lowest index), else LRU-oldest
        let victim_idx = match set.iter().position(|w| !w.valid) {
            Some(i) => i,
            None => set
                .iter()
                .enumerate()
                .min_by_key(|(_, w)| w.last_used)
                .map(|(i, _)| i)
                .unwrap(),
        };
        let victim = set[victim_idx];
        set[victim_idx] = Way {
            tag: d.tag,
            valid: true,
            dirty: d.kind == TxnKind::Write,
            last_used: now,
        };

        self.stats.misses += 1;
        let eviction = if victim.valid {
            self.stats.evictions += 1;
            if victim.dirty {
                self.stats.writebacks += 1;
            }
            Some(Eviction {
                victim_addr: self.line_addr_of(victim.tag, d.set_index),
                dirty: victim.dirty,
            })
        } else {
            None
        };
        LookupOutcome::Miss { eviction }
    }

    /// Invariant check used by tests: no tag is valid twice within one set
    /// and recency stamps of valid ways are pairwise distinct.
    pub fn check_consistency(&self) -> bool {
        for set in 0..self.cfg.n_lines {
            let start = (set * self.cfg.n_ways) as usize;
            let ways = &self.ways[start..start + self.cfg.n_ways as usize];
            for (i, a) in ways.iter().enumerate() {
                if a.dirty && !a.valid {
                    return false;
                }
                for b in &ways[i + 1..] {
                    if a.valid && b.valid && (a.tag == b.tag || a.last_used == b.last_used) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Split a cacheable transaction into line descriptors covering
/// `[addr, addr + len)`, line-aligned, ascending, no duplicates.
pub fn decompose(cfg: &LlcConfig, txn: &MemTxn) -> Vec<LineDescriptor> {
    let line = cfg.line_bytes();
    let first = txn.addr / line;
    let last = (txn.addr + txn.len_bytes - 1) / line;
    (first..=last)
        .map(|n| LineDescriptor::new(cfg, n * line, txn.kind))
        .collect()
}

/// Number of AXI-width blocks of the descriptor's line that `txn` touches.
fn blocks_touched(cfg: &LlcConfig, d: &LineDescriptor, txn: &MemTxn) -> u64 {
    let block = cfg.block_bytes();
    let line_end = d.line_addr + cfg.line_bytes();
    let start = txn.addr.max(d.line_addr);
    let end = (txn.addr + txn.len_bytes).min(line_end);
    let first = (start - d.line_addr) / block;
    let last = (end - 1 - d.line_addr) / block;
    last - first + 1
}

/// Run one transaction through the cache.
///
/// Addresses outside `cacheable` bypass the cache entirely: the transaction
/// passes through to the backend unchanged and no state is touched.
/// Cacheable transactions are split into descriptors; each costs one tag
/// cycle plus one cycle per touched block, and misses add the victim
/// write-back (when dirty) followed by the refill read, timed by the backend.
pub fn llc_access<B: MemTiming>(
    state: &mut LlcState,
    cacheable: &Region,
    txn: &MemTxn,
    backend: &B,
) -> Result<LlcAccess, MemError> {
    let cfg = *state.config();
    if !cacheable.contains_span(txn.addr, txn.total_bytes()) {
        let cycles = backend.access_soc_cycles(txn)?;
        return Ok(LlcAccess {
            soc_cycles: cycles,
            backend_txns: vec![*txn],
            hits: 0,
            misses: 0,
        });
    }

    let mut out = LlcAccess {
        soc_cycles: 0,
        backend_txns: Vec::new(),
        hits: 0,
        misses: 0,
    };
    for line in crate::mem::dma_expand_2d(txn) {
        for d in decompose(&cfg, &line) {
            out.soc_cycles += 1 + blocks_touched(&cfg, &d, &line);
            match state.lookup_and_update(&d) {
                LookupOutcome::Hit => out.hits += 1,
                LookupOutcome::Miss { eviction } => {
                    out.misses += 1;
                    if let Some(ev) = eviction {
                        if ev.dirty {
                            let wb =
                                MemTxn::write(ev.victim_addr, cfg.line_bytes(), Initiator::Llc);
                            out.soc_cycles += backend.access_soc_cycles(&wb)?;
                            out.backend_txns.push(wb);
                        }
                    }
                    let refill = MemTxn::read(d.line_addr, cfg.line_bytes(), Initiator::Llc);
                    out.soc_cycles += backend.access_soc_cycles(&refill)?;
                    out.backend_txns.push(refill);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Backend stub with a fixed per-transaction cost.
    struct FlatBackend(u64);
    impl MemTiming for FlatBackend {
        fn access_soc_cycles(&self, _txn: &MemTxn) -> Result<u64, MemError> {
            Ok(self.0)
        }
    }

    fn cacheable_all() -> Region {
        Region {
            base: 0,
            size: 1 << 40,
        }
    }

    #[test]
    fn geometry_matches_shipped_configuration() {
        let cfg = LlcConfig::default();
        assert_eq!(cfg.size_bytes(), 131072);
        assert_eq!(cfg.line_bytes(), 64);
        assert_eq!(cfg.n_lines, 256);
        assert_eq!(cfg.n_ways, 8);
    }

    #[test]
    fn decompose_examples() {
        let cfg = LlcConfig::default();
        let addrs = |txn: &MemTxn| {
            decompose(&cfg, txn)
                .iter()
                .map(|d| d.line_addr)
                .collect::<Vec<_>>()
        };
        assert_eq!(
            addrs(&MemTxn::read(0x100, 256, Initiator::Host)),
            vec![0x100, 0x140, 0x180, 0x1C0]
        );
        assert_eq!(
            addrs(&MemTxn::read(0x13C, 8, Initiator::Host)),
            vec![0x100, 0x140]
        );
        assert_eq!(
            addrs(&MemTxn::read(0x140, 64, Initiator::Host)),
            vec![0x140]
        );
    }

    #[test]
    fn descriptor_index_and_tag_derivation() {
        let cfg = LlcConfig::default();
        let d = LineDescriptor::new(&cfg, 0x1_0040, TxnKind::Read);
        assert_eq!(d.set_index, (0x1_0040 / 64) % 256);
        assert_eq!(d.tag, 0x1_0040 / (64 * 256));
    }

    #[test]
    fn cold_miss_then_hit() {
        let cfg = LlcConfig::default();
        let mut state = LlcState::new(cfg);
        let d = LineDescriptor::new(&cfg, 0x40, TxnKind::Read);
        assert_eq!(
            state.lookup_and_update(&d),
            LookupOutcome::Miss { eviction: None }
        );
        assert_eq!(state.lookup_and_update(&d), LookupOutcome::Hit);
    }

    #[test]
    fn lru_evicts_oldest_of_nine_conflicting_tags() {
        let cfg = LlcConfig::default();
        let mut state = LlcState::new(cfg);
        let set_stride = cfg.line_bytes() * cfg.n_lines; // same set, next tag
        let addr_of = |i: u64| i * set_stride;

        for i in 0..9 {
            let d = LineDescriptor::new(&cfg, addr_of(i), TxnKind::Read);
            let outcome = state.lookup_and_update(&d);
            if i < 8 {
                assert_eq!(outcome, LookupOutcome::Miss { eviction: None });
            } else {
                // the 9th access evicts the 1st (LRU-oldest, clean)
                assert_eq!(
                    outcome,
                    LookupOutcome::Miss {
                        eviction: Some(Eviction {
                            victim_addr: addr_of(0),
                            dirty: false
                        })
                    }
                );
            }
        }
        // the 1st tag is gone: accessing it again misses
        let d0 = LineDescriptor::new(&cfg, addr_of(0), TxnKind::Read);
        assert!(matches!(
            state.lookup_and_update(&d0),
            LookupOutcome::Miss { .. }
        ));
    }

    #[test]
    fn write_dirties_and_eviction_reports_it() {
        let cfg = LlcConfig::default();
        let mut state = LlcState::new(cfg);
        let set_stride = cfg.line_bytes() * cfg.n_lines;
        state.lookup_and_update(&LineDescriptor::new(&cfg, 0, TxnKind::Write));
        for i in 1..=8 {
            let out =
                state.lookup_and_update(&LineDescriptor::new(&cfg, i * set_stride, TxnKind::Read));
            if i == 8 {
                assert_eq!(
                    out,
                    LookupOutcome::Miss {
                        eviction: Some(Eviction {
                            victim_addr: 0,
                            dirty: true
                        })
                    }
                );
            }
        }
        assert_eq!(state.stats.writebacks, 1);
        assert_eq!(state.stats.evictions, 1);
    }

    #[test]
    fn bypass_passes_through_untouched() {
        let cfg = LlcConfig::default();
        let mut state = LlcState::new(cfg);
        let window = Region {
            base: 0x1000,
            size: 0x1000,
        };
        let txn = MemTxn::read(0x8000, 128, Initiator::Host);
        let out = llc_access(&mut state, &window, &txn, &FlatBackend(11)).unwrap();
        assert_eq!(out.backend_txns, vec![txn]);
        assert_eq!(out.soc_cycles, 11);
        assert_eq!((out.hits, out.misses), (0, 0));
        assert_eq!(state.stats, LlcStats::default());
    }

    #[test]
    fn warm_full_line_hit_costs_tag_plus_blocks() {
        let cfg = LlcConfig::default();
        let mut state = LlcState::new(cfg);
        let txn = MemTxn::read(0x1000, 64, Initiator::Host);
        llc_access(&mut state, &cacheable_all(), &txn, &FlatBackend(50)).unwrap();
        let warm = llc_access(&mut state, &cacheable_all(), &txn, &FlatBackend(50)).unwrap();
        assert_eq!(warm.soc_cycles, 9);
        assert!(warm.backend_txns.is_empty());
    }

    #[test]
    fn cold_miss_clean_victim_refills_only() {
        let cfg = LlcConfig::default();
        let mut state = LlcState::new(cfg);
        let txn = MemTxn::read(0x1000, 8, Initiator::Host);
        let out = llc_access(&mut state, &cacheable_all(), &txn, &FlatBackend(50)).unwrap();
        assert_eq!(out.backend_txns.len(), 1);
        assert_eq!(
            out.backend_txns[0],
            MemTxn::read(0x1000, 64, Initiator::Llc)
        );
        // 1 tag + 1 block + one backend refill
        assert_eq!(out.soc_cycles, 1 + 1 + 50);
    }

    #[test]
    fn dirty_victim_writes_back_before_refill() {
        let cfg = LlcConfig::default();
        let mut state = LlcState::new(cfg);
        let set_stride = cfg.line_bytes() * cfg.n_lines;
        llc_access(
            &mut state,
            &cacheable_all(),
            &MemTxn::write(0, 8, Initiator::Host),
            &FlatBackend(50),
        )
        .unwrap();
        for i in 1..8 {
            llc_access(
                &mut state,
                &cacheable_all(),
                &MemTxn::read(i * set_stride, 8, Initiator::Host),
                &FlatBackend(50),
            )
            .unwrap();
        }
        let out = llc_access(
            &mut state,
            &cacheable_all(),
            &MemTxn::read(8 * set_stride, 8, Initiator::Host),
            &FlatBackend(50),
        )
        .unwrap();
        assert_eq!(out.backend_txns.len(), 2);
        assert_eq!(out.backend_txns[0], MemTxn::write(0, 64, Initiator::Llc));
        assert_eq!(
            out.backend_txns[1],
            MemTxn::read(8 * set_stride, 64, Initiator::Llc)
        );
        assert_eq!(out.soc_cycles, 1 + 1 + 50 + 50);
    }

    #[test]
    fn all_write_trace_balances_refills_against_writebacks() {
        // With every installed line dirtied, each eviction writes back, so
        // refilled bytes minus written-back bytes equals line_bytes times the
        // change in valid-line count.
        let cfg = LlcConfig {
            n_lines: 4,
            n_ways: 2,
            ..Default::default()
        };
        let mut state = LlcState::new(cfg);
        let mut rng_addr = 1u64;
        for i in 0..2000u64 {
            rng_addr = rng_addr
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let addr = (rng_addr >> 20) % (1 << 16);
            let txn = MemTxn::write(addr, 1 + i % 8, Initiator::Host);
            llc_access(&mut state, &cacheable_all(), &txn, &FlatBackend(1)).unwrap();
        }
        let line = cfg.line_bytes();
        let refilled = state.stats.misses * line;
        let written_back = state.stats.writebacks * line;
        assert_eq!(refilled - written_back, line * state.valid_line_count());
        assert_eq!(state.stats.evictions, state.stats.writebacks);
        assert!(state.check_consistency());
    }

    proptest! {
        #[test]
        fn descriptors_cover_span_exactly(addr in 0u64..100_000, len in 1u64..1000) {
            let cfg = LlcConfig::default();
            let txn = MemTxn::read(addr, len, Initiator::Host);
            let ds = decompose(&cfg, &txn);
            prop_assert!(ds.windows(2).all(|w| w[1].line_addr == w[0].line_addr + cfg.line_bytes()));
            prop_assert!(ds[0].line_addr <= addr && addr < ds[0].line_addr + cfg.line_bytes());
            let last = ds.last().unwrap();
            prop_assert!(last.line_addr < addr + len && addr + len <= last.line_addr + cfg.line_bytes());
        }

        #[test]
        fn no_duplicate_tags_after_random_updates(seed in 0u64..500) {
            let cfg = LlcConfig { n_lines: 8, n_ways: 4, ..Default::default() };
            let mut state = LlcState::new(cfg);
            let mut x = seed.wrapping_add(7);
            for _ in 0..600 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let addr = ((x >> 16) % (1 << 15)) / cfg.line_bytes() * cfg.line_bytes();
                let kind = if x % 3 == 0 { TxnKind::Write } else { TxnKind::Read };
                state.lookup_and_update(&LineDescriptor::new(&cfg, addr, kind));
            }
            prop_assert!(state.check_consistency());
        }
    }
}
