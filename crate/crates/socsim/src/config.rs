//! Full simulation configuration: clock domains, address map, cache and
//! memory geometry, power table, and kernel calibration. One self-contained
//! JSON document describes a run; no environment overrides.
//!
//! A loaded `SocConfig` is immutable and safe to share read-only across
//! concurrent simulation instances.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llc::LlcConfig;
use crate::mem::{DdrConfig, HyperConfig, MAX_BUS_FREQ_MHZ, MAX_BYTES_PER_CS};
use crate::pmca::CalibrationTable;
use crate::power::{self, PowerParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration:\n{0}")]
    Validation(Violations),
}

/// All invariant violations found in one pass, each with its field path.
#[derive(Debug, Default)]
pub struct Violations(pub Vec<String>);

impl Violations {
    fn push(&mut self, path: &str, msg: impl fmt::Display) {
        self.0.push(format!("{path}: {msg}"));
    }

    fn into_result(self) -> Result<(), ConfigError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(self))
        }
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// One frequency domain, set by its own FLL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClockDomain {
    pub freq_mhz: f64,
    pub max_freq_mhz: f64,
}

impl ClockDomain {
    const fn new(freq_mhz: f64, max_freq_mhz: f64) -> Self {
        Self {
            freq_mhz,
            max_freq_mhz,
        }
    }

    pub fn freq_hz(&self) -> f64 {
        self.freq_mhz * 1e6
    }
}

impl Default for ClockDomain {
    fn default() -> Self {
        Self::new(400.0, 450.0)
    }
}

/// The four FLL-adjusted domains of the SoC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct ClockSet {
    pub host_core: ClockDomain,
    pub host_domain: ClockDomain,
    pub peripheral_domain: ClockDomain,
    pub cluster: ClockDomain,
}

impl Default for ClockSet {
    fn default() -> Self {
        Self {
            host_core: ClockDomain::new(900.0, 900.0),
            host_domain: ClockDomain::new(400.0, 450.0),
            peripheral_domain: ClockDomain::new(400.0, 450.0),
            cluster: ClockDomain::new(400.0, 400.0),
        }
    }
}

impl ClockSet {
    pub fn domain(&self, name: DomainName) -> &ClockDomain {
        match name {
            DomainName::HostCore => &self.host_core,
            DomainName::HostDomain => &self.host_domain,
            DomainName::PeripheralDomain => &self.peripheral_domain,
            DomainName::Cluster => &self.cluster,
        }
    }

    fn iter(&self) -> [(&'static str, &ClockDomain); 4] {
        [
            ("host-core", &self.host_core),
            ("host-domain", &self.host_domain),
            ("peripheral-domain", &self.peripheral_domain),
            ("cluster", &self.cluster),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainName {
    HostCore,
    HostDomain,
    PeripheralDomain,
    Cluster,
}

/// Half-open address region `[base, base + size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    #[serde(with = "hex_u64")]
    pub base: u64,
    pub size: u64,
}

impl Region {
    pub fn end(&self) -> u64 {
        self.base + self.size
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr < self.end()
    }

    pub fn contains_span(&self, addr: u64, len: u64) -> bool {
        self.contains(addr) && addr + len <= self.end()
    }

    fn overlaps(&self, other: &Region) -> bool {
        self.base < other.end() && other.base < self.end()
    }
}

/// Accept addresses as JSON integers or `"0x..."` strings; emit hex strings.
mod hex_u64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:#x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(v),
            Raw::Str(s) => {
                let t = s.trim();
                if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
                    u64::from_str_radix(hex, 16).map_err(de::Error::custom)
                } else {
                    t.parse().map_err(de::Error::custom)
                }
            }
        }
    }
}

/// System address map. The DRAM size may be omitted in configs, in which
/// case it is derived from the HyperRAM capacity; the cacheable window
/// defaults to the entire DRAM region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AddressMap {
    pub l2spm: Region,
    pub dram: DramRegion,
    pub cacheable_window: Option<Region>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DramRegion {
    #[serde(with = "hex_u64")]
    pub base: u64,
    /// `None` means "derive from HyperRAM capacity".
    pub size: Option<u64>,
}

impl Default for AddressMap {
    fn default() -> Self {
        Self {
            l2spm: Region {
                base: 0x1C00_0000,
                size: 512 * 1024,
            },
            dram: DramRegion {
                base: 0x8000_0000,
                size: None,
            },
            cacheable_window: None,
        }
    }
}

/// Tag produced by `classify_address`; every address gets exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    L2Spm,
    DramCacheable,
    DramBypass,
    Unmapped,
}

// Field-level defaults (not a container-level `default`): a missing section
// must fall back to its own unresolved default so that derived values (DRAM
// size, LPDDR power) are computed against the sections the document does
// set, not against the fully resolved shipped configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocConfig {
    #[serde(default)]
    pub clocks: ClockSet,
    #[serde(default)]
    pub address_map: AddressMap,
    #[serde(default)]
    pub llc: LlcConfig,
    #[serde(default)]
    pub hyper: HyperConfig,
    #[serde(default)]
    pub ddr: DdrConfig,
    #[serde(default = "power::default_power_table")]
    pub power: Vec<PowerParams>,
    #[serde(default)]
    pub calibration: CalibrationTable,
}

impl Default for SocConfig {
    fn default() -> Self {
        let mut cfg = Self {
            clocks: ClockSet::default(),
            address_map: AddressMap::default(),
            llc: LlcConfig::default(),
            hyper: HyperConfig::default(),
            ddr: DdrConfig::default(),
            power: power::default_power_table(),
            calibration: CalibrationTable::default(),
        };
        cfg.apply_defaults();
        cfg
    }
}

impl SocConfig {
    /// Fill the two derived defaults: DRAM size from HyperRAM capacity, and
    /// the LPDDR subsystem power pinned so that a compute-bound kernel sees
    /// exactly twice the energy efficiency on the HyperRAM backend
    /// (P_lpddr = P_soc_active + 2 * P_hyper_device).
    pub fn apply_defaults(&mut self) {
        if self.address_map.dram.size.is_none() {
            self.address_map.dram.size = Some(self.hyper.total_capacity_bytes());
        }
        if self.address_map.cacheable_window.is_none() {
            self.address_map.cacheable_window = Some(self.dram_region());
        }
        if self.ddr.subsystem_power_mw.is_none() {
            let p_soc = power::soc_active_power_mw(&self.power, &self.clocks).unwrap_or(0.0);
            self.ddr.subsystem_power_mw = Some(p_soc + 2.0 * self.hyper.device_power_mw);
        }
    }

    pub fn dram_region(&self) -> Region {
        Region {
            base: self.address_map.dram.base,
            size: self.address_map.dram.size.unwrap_or(0),
        }
    }

    pub fn cacheable_window(&self) -> Region {
        self.address_map
            .cacheable_window
            .unwrap_or_else(|| self.dram_region())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Violations::default();

        for (name, dom) in self.clocks.iter() {
            let path = format!("clocks.{name}");
            if dom.freq_mhz.is_nan() || dom.freq_mhz <= 0.0 {
                v.push(&format!("{path}.freq_mhz"), "must be > 0");
            }
            if dom.freq_mhz > dom.max_freq_mhz {
                v.push(
                    &format!("{path}.freq_mhz"),
                    format!("exceeds max_freq_mhz {}", dom.max_freq_mhz),
                );
            }
        }

        // hyper
        if self.hyper.n_cs == 0 {
            v.push("hyper.n_cs", "must be >= 1");
        }
        if !matches!(self.hyper.n_buses, 1 | 2) {
            v.push("hyper.n_buses", "must be 1 or 2");
        }
        if !self.hyper.mem_bytes_per_cs.is_power_of_two()
            || self.hyper.mem_bytes_per_cs > MAX_BYTES_PER_CS
        {
            v.push(
                "hyper.mem_bytes_per_cs",
                format!("must be a power of two up to {MAX_BYTES_PER_CS}"),
            );
        } else if self.hyper.n_buses == 2 && self.hyper.mem_bytes_per_cs < 2 {
            // 16-bit interleaving needs at least two bytes per device
            v.push("hyper.mem_bytes_per_cs", "must be >= 2 with two buses");
        }
        if !(self.hyper.bus_freq_mhz > 0.0 && self.hyper.bus_freq_mhz <= MAX_BUS_FREQ_MHZ) {
            v.push(
                "hyper.bus_freq_mhz",
                format!("must be in (0, {MAX_BUS_FREQ_MHZ}]"),
            );
        }
        if self.hyper.device_power_mw < 0.0 {
            v.push("hyper.device_power_mw", "must be >= 0");
        }

        // ddr
        if self.ddr.bytes_per_soc_cycle.is_nan() || self.ddr.bytes_per_soc_cycle <= 0.0 {
            v.push("ddr.bytes_per_soc_cycle", "must be > 0");
        }
        if let Some(p) = self.ddr.subsystem_power_mw {
            if p < 0.0 {
                v.push("ddr.subsystem_power_mw", "must be >= 0");
            }
        }

        // llc geometry
        for (name, val) in [
            ("llc.axi_dw_bits", self.llc.axi_dw_bits),
            ("llc.n_blocks", self.llc.n_blocks),
            ("llc.n_lines", self.llc.n_lines),
            ("llc.n_ways", self.llc.n_ways),
        ] {
            if !val.is_power_of_two() {
                v.push(name, "must be a power of two");
            }
        }
        if self.llc.axi_dw_bits < 8 {
            v.push("llc.axi_dw_bits", "must be at least 8");
        }

        // address map
        let l2 = self.address_map.l2spm;
        let dram = self.dram_region();
        for (name, r) in [("address_map.l2spm", l2), ("address_map.dram", dram)] {
            if r.size == 0 || !r.size.is_power_of_two() {
                v.push(&format!("{name}.size"), "must be a nonzero power of two");
            } else if r.base % r.size != 0 {
                v.push(
                    &format!("{name}.base"),
                    "must be aligned to the region size",
                );
            }
        }
        if l2.overlaps(&dram) {
            v.push("address_map", "l2spm and dram regions overlap");
        }
        if dram.size != self.hyper.total_capacity_bytes() {
            v.push(
                "address_map.dram.size",
                format!(
                    "{} does not match HyperRAM capacity {} (n_cs x n_buses x mem_bytes_per_cs)",
                    dram.size,
                    self.hyper.total_capacity_bytes()
                ),
            );
        }
        let win = self.cacheable_window();
        if win.size == 0 || !win.size.is_power_of_two() {
            v.push(
                "address_map.cacheable_window.size",
                "must be a nonzero power of two",
            );
        } else if !win.base.is_multiple_of(win.size) {
            v.push(
                "address_map.cacheable_window.base",
                "must be aligned to the region size",
            );
        }
        if !(dram.contains(win.base) && win.end() <= dram.end()) {
            v.push(
                "address_map.cacheable_window",
                "must lie entirely inside dram",
            );
        }

        // power table: known components, one entry each, sane values
        for (i, p) in self.power.iter().enumerate() {
            let path = format!("power[{i}]");
            if self
                .power
                .iter()
                .filter(|q| q.component == p.component)
                .count()
                > 1
            {
                v.push(
                    &path,
                    format!("duplicate entry for component {}", p.component),
                );
            }
            if p.leakage_mw < 0.0 || p.dynamic_uw_per_mhz < 0.0 || p.max_freq_mhz < 0.0 {
                v.push(&path, "power figures must be >= 0");
            }
            let dom = self.clocks.domain(p.component.clock_domain());
            if dom.max_freq_mhz > p.max_freq_mhz {
                v.push(
                    &format!("{path}.max_freq_mhz"),
                    format!(
                        "below its clock domain ceiling {} MHz; the component could be driven out of range",
                        dom.max_freq_mhz
                    ),
                );
            }
        }
        for comp in power::ComponentId::ALL {
            if !self.power.iter().any(|p| p.component == comp) {
                v.push("power", format!("missing entry for component {comp}"));
            }
        }

        // calibration
        self.calibration
            .validate(&mut |path, msg| v.push(path, msg));

        v.into_result()
    }

    /// Tag an address with the region it belongs to. Total: exactly one tag
    /// per address, the cacheable window taking precedence inside DRAM.
    pub fn classify_address(&self, addr: u64) -> RegionTag {
        if self.address_map.l2spm.contains(addr) {
            RegionTag::L2Spm
        } else if self.cacheable_window().contains(addr) {
            RegionTag::DramCacheable
        } else if self.dram_region().contains(addr) {
            RegionTag::DramBypass
        } else {
            RegionTag::Unmapped
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse, fill defaults, and validate a configuration document.
pub fn load_config(text: &str) -> Result<SocConfig, ConfigError> {
    let mut cfg: SocConfig = serde_json::from_str(text)?;
    cfg.apply_defaults();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: &Path) -> Result<SocConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config(&text)
}
