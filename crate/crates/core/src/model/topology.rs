//! Network topology: transformers, feeders, nodes, lines, meters, switch bars.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub type MeterId = String;

/// Phase connection of a meter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseLabel {
    A,
    B,
    C,
    #[serde(rename = "three-phase")]
    ThreePhase,
}

impl PhaseLabel {
    /// Single-phase index (A=0, B=1, C=2).
    pub fn index(self) -> Option<usize> {
        match self {
            PhaseLabel::A => Some(0),
            PhaseLabel::B => Some(1),
            PhaseLabel::C => Some(2),
            PhaseLabel::ThreePhase => None,
        }
    }

    pub fn from_index(i: usize) -> PhaseLabel {
        match i {
            0 => PhaseLabel::A,
            1 => PhaseLabel::B,
            _ => PhaseLabel::C,
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseLabel::A => write!(f, "A"),
            PhaseLabel::B => write!(f, "B"),
            PhaseLabel::C => write!(f, "C"),
            PhaseLabel::ThreePhase => write!(f, "three-phase"),
        }
    }
}

/// Series impedance of one phase conductor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impedance {
    pub r_ohms: f64,
    pub x_ohms: f64,
}

impl Impedance {
    pub fn new(r_ohms: f64, x_ohms: f64) -> Self {
        Self { r_ohms, x_ohms }
    }

    pub fn zero() -> Self {
        Self { r_ohms: 0.0, x_ohms: 0.0 }
    }
}

/// MV/LV transformer: the source node of one or more feeders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub id: String,
    /// Nominal phase-to-neutral voltage per phase, in volts.
    pub nominal_phase_v: [f64; 3],
    /// Source impedance behind the LV busbar; couples feeders that share it.
    pub source_impedance: Impedance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feeder {
    pub id: String,
    pub transformer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub feeder: String,
    /// Tree path length from the feeder root, in meters.
    pub distance_m: f64,
    /// Number of meters attached to this node.
    pub connections: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    /// Upstream endpoint: a node id or a transformer id.
    pub from: String,
    pub to: String,
    pub length_m: f64,
    /// Per-phase series impedance (A, B, C).
    pub impedance: [Impedance; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterInfo {
    pub node: String,
    pub phase: PhaseLabel,
    pub feeder: String,
}

/// A bank of switchgear with a catalog of admissible joint states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchBar {
    pub bar_id: String,
    pub switch_count: usize,
    pub feeder_ids: Vec<String>,
    /// Admissible binary state vectors, in catalog order.
    pub state_catalog: Vec<Vec<u8>>,
    /// Class label of each catalog entry; a bijection onto 0..J-1.
    pub encoding: Vec<u32>,
}

impl SwitchBar {
    /// Bar with the identity encoding (catalog position = class label).
    pub fn new(
        bar_id: impl Into<String>,
        switch_count: usize,
        feeder_ids: Vec<String>,
        state_catalog: Vec<Vec<u8>>,
    ) -> Self {
        let encoding = (0..state_catalog.len() as u32).collect();
        Self {
            bar_id: bar_id.into(),
            switch_count,
            feeder_ids,
            state_catalog,
            encoding,
        }
    }

    pub fn class_count(&self) -> usize {
        self.state_catalog.len()
    }

    pub fn position_of(&self, state: &[u8]) -> Option<usize> {
        self.state_catalog.iter().position(|s| s == state)
    }
}

/// Joint state of one bar at an instant, with its encoded class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchBarState {
    pub bar_id: String,
    pub state: Vec<u8>,
    pub label: u32,
}

/// Ground-truth or recorded network graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub transformers: Vec<Transformer>,
    pub feeders: Vec<Feeder>,
    pub nodes: Vec<Node>,
    pub lines: Vec<Line>,
    pub meters: BTreeMap<MeterId, MeterInfo>,
    pub switch_bars: Vec<SwitchBar>,
}

impl NetworkTopology {
    pub fn feeder_ids(&self) -> Vec<String> {
        self.feeders.iter().map(|f| f.id.clone()).collect()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn transformer(&self, id: &str) -> Option<&Transformer> {
        self.transformers.iter().find(|t| t.id == id)
    }

    pub fn bar(&self, id: &str) -> Option<&SwitchBar> {
        self.switch_bars.iter().find(|b| b.bar_id == id)
    }

    /// Meter ids in sorted order (the canonical panel row order).
    pub fn meter_ids(&self) -> Vec<MeterId> {
        self.meters.keys().cloned().collect()
    }

    /// Meters of one feeder, in sorted id order.
    pub fn meters_of_feeder(&self, feeder: &str) -> Vec<MeterId> {
        self.meters
            .iter()
            .filter(|(_, info)| info.feeder == feeder)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// One broken rule on one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

fn violation(entity: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation {
        entity: entity.into(),
        rule: rule.into(),
    }
}

/// Checks every structural invariant; returns an empty list iff all hold.
pub fn validate_topology(topo: &NetworkTopology) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut tx_ids = BTreeSet::new();
    for t in &topo.transformers {
        if !tx_ids.insert(t.id.as_str()) {
            out.push(violation(&t.id, "duplicate transformer id"));
        }
        if t.nominal_phase_v.iter().any(|&v| v <= 0.0) {
            out.push(violation(&t.id, "nominal phase voltage must be positive"));
        }
        if t.source_impedance.r_ohms < 0.0 || t.source_impedance.x_ohms < 0.0 {
            out.push(violation(&t.id, "negative source impedance"));
        }
    }

    let mut node_ids = BTreeSet::new();
    for n in &topo.nodes {
        if !node_ids.insert(n.id.as_str()) {
            out.push(violation(&n.id, "duplicate node id"));
        }
        if tx_ids.contains(n.id.as_str()) {
            out.push(violation(&n.id, "node id collides with a transformer id"));
        }
        if topo.feeders.iter().all(|f| f.id != n.feeder) {
            out.push(violation(&n.id, format!("references unknown feeder {}", n.feeder)));
        }
    }

    for f in &topo.feeders {
        if !tx_ids.contains(f.transformer.as_str()) {
            out.push(violation(&f.id, format!("references unknown transformer {}", f.transformer)));
        }
    }

    for (i, l) in topo.lines.iter().enumerate() {
        let tag = format!("line {} ({} -> {})", i, l.from, l.to);
        for z in &l.impedance {
            if z.r_ohms < 0.0 || z.x_ohms < 0.0 {
                out.push(violation(&tag, "negative impedance"));
            }
            if z.r_ohms <= 0.0 && z.x_ohms <= 0.0 {
                out.push(violation(&tag, "at least one of R, X must be strictly positive"));
            }
        }
        for end in [&l.from, &l.to] {
            if !node_ids.contains(end.as_str()) && !tx_ids.contains(end.as_str()) {
                out.push(violation(&tag, format!("references unknown endpoint {end}")));
            }
        }
    }

    // Radiality: per feeder, the node set plus its incident lines must form a
    // tree rooted at the feeder's transformer.
    let node_feeder: HashMap<&str, &str> = topo
        .nodes
        .iter()
        .map(|n| (n.id.as_str(), n.feeder.as_str()))
        .collect();
    for f in &topo.feeders {
        let members: BTreeSet<&str> = topo
            .nodes
            .iter()
            .filter(|n| n.feeder == f.id)
            .map(|n| n.id.as_str())
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        let mut edge_count = 0usize;
        for l in &topo.lines {
            let from_in = members.contains(l.from.as_str()) || l.from == f.transformer;
            let to_in = members.contains(l.to.as_str()) || l.to == f.transformer;
            // Only count lines touching this feeder's subgraph.
            let owns = members.contains(l.from.as_str()) || members.contains(l.to.as_str());
            if from_in && to_in && owns {
                adj.entry(l.from.as_str()).or_default().push(l.to.as_str());
                adj.entry(l.to.as_str()).or_default().push(l.from.as_str());
                edge_count += 1;
            }
        }
        // BFS from the transformer.
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut queue = vec![f.transformer.as_str()];
        let mut visited_root = false;
        while let Some(v) = queue.pop() {
            if v == f.transformer {
                if visited_root {
                    continue;
                }
                visited_root = true;
            } else if !seen.insert(v) {
                continue;
            }
            for &w in adj.get(v).into_iter().flatten() {
                if w != f.transformer && !seen.contains(w) {
                    queue.push(w);
                }
            }
        }
        if seen.len() != members.len() || edge_count != members.len() {
            out.push(violation(
                &f.id,
                format!(
                    "feeder subgraph is not a tree rooted at {} ({} nodes, {} reachable, {} edges)",
                    f.transformer,
                    members.len(),
                    seen.len(),
                    edge_count
                ),
            ));
        }
    }

    for (id, m) in &topo.meters {
        match node_feeder.get(m.node.as_str()) {
            None => out.push(violation(id, format!("dangling meter: node {} does not exist", m.node))),
            Some(&feeder) => {
                if feeder != m.feeder {
                    out.push(violation(
                        id,
                        format!("meter feeder {} disagrees with node feeder {feeder}", m.feeder),
                    ));
                }
            }
        }
    }

    // Node connection counts must match attached meters.
    let mut per_node: BTreeMap<&str, u32> = BTreeMap::new();
    for m in topo.meters.values() {
        *per_node.entry(m.node.as_str()).or_default() += 1;
    }
    for n in &topo.nodes {
        let actual = per_node.get(n.id.as_str()).copied().unwrap_or(0);
        if actual != n.connections {
            out.push(violation(
                &n.id,
                format!("connection count {} disagrees with {} attached meter(s)", n.connections, actual),
            ));
        }
    }

    for b in &topo.switch_bars {
        let j = b.state_catalog.len();
        for s in &b.state_catalog {
            if s.len() != b.switch_count {
                out.push(violation(&b.bar_id, format!("state {s:?} length differs from switch_count")));
            }
            if s.iter().any(|&x| x > 1) {
                out.push(violation(&b.bar_id, format!("state {s:?} has non-binary entries")));
            }
        }
        let mut labels: Vec<u32> = b.encoding.clone();
        labels.sort_unstable();
        if b.encoding.len() != j || labels != (0..j as u32).collect::<Vec<_>>() {
            out.push(violation(&b.bar_id, "encoding is not a bijection onto 0..J-1"));
        }
        for fid in &b.feeder_ids {
            if topo.feeders.iter().all(|f| &f.id != fid) {
                out.push(violation(&b.bar_id, format!("references unknown feeder {fid}")));
            }
        }
    }

    out
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    /// Two-node, one-feeder toy network used by the validation tests.
    pub(crate) fn tiny_topology() -> NetworkTopology {
        let z = [Impedance::new(0.01, 0.003); 3];
        NetworkTopology {
            transformers: vec![Transformer {
                id: "T1".into(),
                nominal_phase_v: [230.0; 3],
                source_impedance: Impedance::zero(),
            }],
            feeders: vec![Feeder { id: "F1".into(), transformer: "T1".into() }],
            nodes: vec![
                Node { id: "n1".into(), feeder: "F1".into(), distance_m: 15.0, connections: 1 },
                Node { id: "n2".into(), feeder: "F1".into(), distance_m: 30.0, connections: 1 },
            ],
            lines: vec![
                Line { from: "T1".into(), to: "n1".into(), length_m: 15.0, impedance: z },
                Line { from: "n1".into(), to: "n2".into(), length_m: 15.0, impedance: z },
            ],
            meters: BTreeMap::from([
                ("m001".to_string(), MeterInfo { node: "n1".into(), phase: PhaseLabel::A, feeder: "F1".into() }),
                ("m002".to_string(), MeterInfo { node: "n2".into(), phase: PhaseLabel::A, feeder: "F1".into() }),
            ]),
            switch_bars: vec![],
        }
    }
}
