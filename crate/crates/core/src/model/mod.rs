//! Domain types shared by every pipeline stage.

mod distance;
pub mod io;
mod labels;
mod panel;
mod topology;

pub use distance::{DistanceKind, DistanceMatrix};
pub use labels::LabelSet;
pub use panel::{VoltagePanel, MINUTES_PER_DAY};
pub use topology::{
    validate_topology, Feeder, Impedance, Line, MeterId, MeterInfo, NetworkTopology, Node,
    PhaseLabel, SwitchBar, SwitchBarState, Transformer, Violation,
};

use crate::error::Result;

/// Minutes since midnight of panel column `t`.
pub fn time_of_day_index(panel: &VoltagePanel, t: usize) -> Result<u32> {
    panel.time_of_day_index(t)
}
