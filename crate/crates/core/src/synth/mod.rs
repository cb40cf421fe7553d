//! Synthetic LVDN generation: labeled networks, load/PV profiles, a
//! three-phase radial power-flow oracle, and corruption injectors.

mod corrupt;
mod dataset;
mod network;
mod powerflow;
mod profiles;
mod schedule;

pub use corrupt::{inject_missing, inject_noise, MissingMode};
pub use dataset::{
    generate, load_dataset, write_dataset, Dataset, LoadedDataset, Manifest, ManifestFiles,
    SwitchTruth,
};
pub use network::{
    attach_switch_bar, build_network, NetworkTemplate, PerNodeConnection, PhaseMode, SwitchSpec,
    Variant, BACKUP_SOURCE, NOMINAL_PHASE_V, PRIMARY_SOURCE,
};
pub use powerflow::{solve_panel, solve_power_flow};
pub use profiles::{generate_injections, generate_injections_grouped, mv_traces, Injections, ProfileConfig, Season};
pub use schedule::schedule_switch_states;
