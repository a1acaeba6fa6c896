//! Power and energy model: per-component leakage + dynamic-slope power,
//! system power over an active set, computation-to-communication ratio
//! (CCR), and the HyperRAM-versus-LPDDR energy-efficiency comparison.
//!
//! Component figures are the typical-corner characterization of the SoC
//! at 0.8 V, 25C. Power is affine in frequency:
//! `P(f) = leakage_mw + dynamic_uw_per_mhz * f_mhz / 1000`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ClockSet, DomainName};
use crate::mem::{Backend, MemError, TxnKind};
use crate::pmca::{stream_soc_cycles, tiled_stream_txns, KernelDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentId {
    Top,
    Cva6,
    Pmca,
    MemCtrl,
}

impl ComponentId {
    pub const ALL: [ComponentId; 4] = [
        ComponentId::Top,
        ComponentId::Cva6,
        ComponentId::Pmca,
        ComponentId::MemCtrl,
    ];

    /// The clock domain whose frequency drives this component's dynamic power.
    pub fn clock_domain(&self) -> DomainName {
        match self {
            ComponentId::Top => DomainName::HostDomain,
            ComponentId::Cva6 => DomainName::HostCore,
            ComponentId::Pmca => DomainName::Cluster,
            ComponentId::MemCtrl => DomainName::HostDomain,
        }
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ComponentId::Top => "top",
            ComponentId::Cva6 => "cva6",
            ComponentId::Pmca => "pmca",
            ComponentId::MemCtrl => "mem-ctrl",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerParams {
    pub component: ComponentId,
    pub leakage_mw: f64,
    pub dynamic_uw_per_mhz: f64,
    pub max_freq_mhz: f64,
}

/// Shipped characterization of the four components.
pub fn default_power_table() -> Vec<PowerParams> {
    vec![
        PowerParams {
            component: ComponentId::Top,
            leakage_mw: 4.23,
            dynamic_uw_per_mhz: 214.7,
            max_freq_mhz: 450.0,
        },
        PowerParams {
            component: ComponentId::Cva6,
            leakage_mw: 4.79,
            dynamic_uw_per_mhz: 47.5,
            max_freq_mhz: 900.0,
        },
        PowerParams {
            component: ComponentId::Pmca,
            leakage_mw: 5.78,
            dynamic_uw_per_mhz: 206.0,
            max_freq_mhz: 400.0,
        },
        PowerParams {
            component: ComponentId::MemCtrl,
            leakage_mw: 0.14,
            dynamic_uw_per_mhz: 2.3,
            max_freq_mhz: 450.0,
        },
    ]
}

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("{component}: frequency {freq_mhz} MHz above ceiling {max_freq_mhz} MHz")]
    FrequencyAboveCeiling {
        component: ComponentId,
        freq_mhz: f64,
        max_freq_mhz: f64,
    },
    #[error("no power entry for component {0}")]
    UnknownComponent(ComponentId),
}

/// Affine power of one component at a frequency.
pub fn component_power_mw(p: &PowerParams, freq_mhz: f64) -> Result<f64, PowerError> {
    if freq_mhz > p.max_freq_mhz {
        return Err(PowerError::FrequencyAboveCeiling {
            component: p.component,
            freq_mhz,
            max_freq_mhz: p.max_freq_mhz,
        });
    }
    Ok(p.leakage_mw + p.dynamic_uw_per_mhz * freq_mhz / 1000.0)
}

fn entry(table: &[PowerParams], c: ComponentId) -> Result<&PowerParams, PowerError> {
    table
        .iter()
        .find(|p| p.component == c)
        .ok_or(PowerError::UnknownComponent(c))
}

/// System power: active components at their domain frequency, inactive ones
/// leakage only, plus the device/subsystem power of the selected backend.
pub fn system_power_mw(
    table: &[PowerParams],
    active: &[ComponentId],
    clocks: &ClockSet,
    backend: Option<&Backend>,
) -> Result<f64, PowerError> {
    let mut total = 0.0;
    for c in ComponentId::ALL {
        let p = entry(table, c)?;
        total += if active.contains(&c) {
            component_power_mw(p, clocks.domain(c.clock_domain()).freq_mhz)?
        } else {
            p.leakage_mw
        };
    }
    Ok(total + backend.map_or(0.0, |b| b.device_power_mw()))
}

/// Everything on, no backend device: the SoC-side active power at the
/// configured operating frequencies.
pub fn soc_active_power_mw(table: &[PowerParams], clocks: &ClockSet) -> Result<f64, PowerError> {
    system_power_mw(table, &ComponentId::ALL, clocks, None)
}

impl ClockSet {
    /// All domains pinned to their ceilings.
    pub fn at_max(&self) -> ClockSet {
        let pin = |d: &crate::config::ClockDomain| crate::config::ClockDomain {
            freq_mhz: d.max_freq_mhz,
            max_freq_mhz: d.max_freq_mhz,
        };
        ClockSet {
            host_core: pin(&self.host_core),
            host_domain: pin(&self.host_domain),
            peripheral_domain: pin(&self.peripheral_domain),
            cluster: pin(&self.cluster),
        }
    }
}

/// Which traffic counts toward communication time in the CCR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcrTraffic {
    /// Reads and writes both occupy the memory system.
    #[default]
    ReadsAndWrites,
    /// Count only time spent reading from main memory.
    ReadsOnly,
}

/// Compute/communication timing of one kernel on one backend, under full
/// overlap of the two phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcrAnalysis {
    pub t_compute_s: f64,
    pub t_mem_s: f64,
    /// `t_compute / t_mem`; infinite for zero-traffic (pure compute) kernels.
    pub ccr: f64,
    pub exec_s: f64,
}

/// Times one invocation's tiled traffic against a backend and forms the CCR.
pub fn ccr(
    k: &KernelDescriptor,
    backend: &Backend,
    clocks: &ClockSet,
    traffic: CcrTraffic,
) -> Result<CcrAnalysis, MemError> {
    let t_compute_s = k.total_ops as f64 / k.pmca_ops_per_cycle / clocks.cluster.freq_hz();
    let txns: Vec<_> = tiled_stream_txns(k)
        .into_iter()
        .filter(|t| traffic == CcrTraffic::ReadsAndWrites || t.kind == TxnKind::Read)
        .collect();
    let t_mem_s = stream_soc_cycles(backend, &txns)? as f64 / clocks.host_domain.freq_hz();
    let ccr = if t_mem_s == 0.0 {
        f64::INFINITY
    } else {
        t_compute_s / t_mem_s
    };
    Ok(CcrAnalysis {
        t_compute_s,
        t_mem_s,
        ccr,
        exec_s: t_compute_s.max(t_mem_s),
    })
}

/// Side-by-side run of one kernel on the HyperRAM and LPDDR backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelAnalysis {
    pub ccr_hyper: f64,
    pub t_compute_s: f64,
    pub t_mem_hyper_s: f64,
    pub t_mem_lpddr_s: f64,
    pub exec_hyper_s: f64,
    pub exec_lpddr_s: f64,
    pub gops_hyper: f64,
    pub gops_lpddr: f64,
    pub system_power_hyper_mw: f64,
    pub system_power_lpddr_mw: f64,
    pub energy_hyper_mj: f64,
    pub energy_lpddr_mj: f64,
    pub gops_per_w_hyper: f64,
    pub gops_per_w_lpddr: f64,
    /// gops_per_w_hyper / gops_per_w_lpddr.
    pub relative_efficiency: f64,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error(transparent)]
    Power(#[from] PowerError),
}

/// Execution time, throughput, energy, and efficiency of one kernel on both
/// backends, whole SoC active.
pub fn relative_efficiency(
    k: &KernelDescriptor,
    clocks: &ClockSet,
    hyper: &Backend,
    lpddr: &Backend,
    table: &[PowerParams],
    traffic: CcrTraffic,
) -> Result<KernelAnalysis, AnalysisError> {
    let h = ccr(k, hyper, clocks, traffic)?;
    let l = ccr(k, lpddr, clocks, traffic)?;
    let p_h = system_power_mw(table, &ComponentId::ALL, clocks, Some(hyper))?;
    let p_l = system_power_mw(table, &ComponentId::ALL, clocks, Some(lpddr))?;
    let gops = |exec_s: f64| k.total_ops as f64 / exec_s / 1e9;
    let gops_h = gops(h.exec_s);
    let gops_l = gops(l.exec_s);
    let eff_h = gops_h / (p_h / 1000.0);
    let eff_l = gops_l / (p_l / 1000.0);
    Ok(KernelAnalysis {
        ccr_hyper: h.ccr,
        t_compute_s: h.t_compute_s,
        t_mem_hyper_s: h.t_mem_s,
        t_mem_lpddr_s: l.t_mem_s,
        exec_hyper_s: h.exec_s,
        exec_lpddr_s: l.exec_s,
        gops_hyper: gops_h,
        gops_lpddr: gops_l,
        system_power_hyper_mw: p_h,
        system_power_lpddr_mw: p_l,
        energy_hyper_mj: p_h * h.exec_s,
        energy_lpddr_mj: p_l * l.exec_s,
        gops_per_w_hyper: eff_h,
        gops_per_w_lpddr: eff_l,
        relative_efficiency: eff_h / eff_l,
    })
}
