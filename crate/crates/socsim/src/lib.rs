//! Deterministic, cycle-approximate simulator for a heterogeneous
//! ultra-low-power SoC memory hierarchy: a host core with an L1 data cache,
//! a parameterizable last-level cache, HyperRAM and ideal-DDR main-memory
//! backends, an analytic accelerator-offload model, and a calibrated
//! power/energy model, wired together by an experiment harness that emits
//! CSV tables.
//!
//! Identical (config, experiment, seed) triples produce byte-identical
//! output, whether sweep points run sequentially or in parallel.

pub mod config;
pub mod experiment;
pub mod host;
pub mod llc;
pub mod mem;
pub mod parallel;
pub mod pmca;
pub mod power;

pub use config::{load_config, load_config_file, ConfigError, RegionTag, SocConfig};
pub use experiment::{
    emit_csv, load_experiment, load_experiment_file, run_experiment, run_experiment_sequential,
    Experiment, ExperimentError, ExperimentSpec, MemoryVariant, ResultTable,
};
pub use host::{run_trace, L1Config, L1State, SimResult, StrideBenchmarkSpec, TraceRecord};
pub use llc::{LlcConfig, LlcState};
pub use mem::{Backend, DdrConfig, HyperConfig, MemTxn};
pub use pmca::{CalibrationTable, KernelDescriptor};
pub use power::{KernelAnalysis, PowerParams};
