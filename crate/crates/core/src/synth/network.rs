//! Synthetic radial LVDN construction from a network template.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Feeder, Impedance, Line, MeterInfo, NetworkTopology, Node, PhaseLabel, SwitchBar, Transformer,
};
use crate::seed::rng_for;

pub const NOMINAL_PHASE_V: f64 = 230.0;

/// Mains impedance per kilometer (all phases alike).
const OHMS_PER_KM_R: f64 = 0.3;
const OHMS_PER_KM_X: f64 = 0.08;
const SERVICE_DROP_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Two complex-structured feeders.
    CN1,
    /// One simple- and one complex-structured feeder.
    CN2,
    /// Two simple-structured feeders.
    SN,
    /// Longer simple-structured feeders.
    SNL,
    /// Simple-structured feeders with more branches.
    SNB,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CN1" => Ok(Variant::CN1),
            "CN2" => Ok(Variant::CN2),
            "SN" => Ok(Variant::SN),
            "SNL" => Ok(Variant::SNL),
            "SNB" => Ok(Variant::SNB),
            other => Err(Error::Config(format!(
                "unknown variant '{other}'; valid: CN1, CN2, SN, SNL, SNB"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerNodeConnection {
    Single,
    Multiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    SinglePhase,
    ThreePhaseNonUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTemplate {
    pub variant: Variant,
    pub feeder_count: usize,
    pub customers_per_feeder: usize,
    pub per_node_connection: PerNodeConnection,
    pub phase_mode: PhaseMode,
    /// Source impedance behind the transformer busbar. With a shared
    /// secondary bus this couples the feeders; otherwise it is folded into
    /// each feeder's root line.
    #[serde(default = "default_tx_impedance")]
    pub transformer_impedance: Impedance,
    #[serde(default)]
    pub shared_secondary_bus: bool,
}

fn default_tx_impedance() -> Impedance {
    Impedance::new(0.008, 0.024)
}

impl NetworkTemplate {
    pub fn new(
        variant: Variant,
        feeder_count: usize,
        customers_per_feeder: usize,
        per_node_connection: PerNodeConnection,
        phase_mode: PhaseMode,
    ) -> Self {
        Self {
            variant,
            feeder_count,
            customers_per_feeder,
            per_node_connection,
            phase_mode,
            transformer_impedance: default_tx_impedance(),
            shared_secondary_bus: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.feeder_count) {
            return Err(Error::Config(format!(
                "feeder_count must be 2 or 3, got {}",
                self.feeder_count
            )));
        }
        if self.customers_per_feeder == 0 {
            return Err(Error::Config("customers_per_feeder must be >= 1".into()));
        }
        Ok(())
    }
}

/// Geometry class of one feeder.
#[derive(Debug, Clone, Copy)]
struct FeederClass {
    main_segments: usize,
    branch_count: usize,
    branch_segments: usize,
    spacing_m: f64,
    root_len_m: f64,
}

const SIMPLE: FeederClass = FeederClass {
    main_segments: 12,
    branch_count: 2,
    branch_segments: 3,
    spacing_m: 15.0,
    root_len_m: 90.0,
};
const SIMPLE_LONG: FeederClass = FeederClass {
    main_segments: 12,
    branch_count: 2,
    branch_segments: 3,
    spacing_m: 32.0,
    root_len_m: 150.0,
};
const SIMPLE_BRANCHY: FeederClass = FeederClass {
    main_segments: 12,
    branch_count: 6,
    branch_segments: 3,
    spacing_m: 15.0,
    root_len_m: 90.0,
};
const COMPLEX: FeederClass = FeederClass {
    main_segments: 24,
    branch_count: 6,
    branch_segments: 5,
    spacing_m: 24.0,
    root_len_m: 320.0,
};

fn feeder_classes(variant: Variant, feeder_count: usize) -> Vec<FeederClass> {
    let (base, extra): (Vec<FeederClass>, FeederClass) = match variant {
        Variant::CN1 => (vec![COMPLEX, COMPLEX], COMPLEX),
        Variant::CN2 => (vec![SIMPLE, COMPLEX], COMPLEX),
        Variant::SN => (vec![SIMPLE, SIMPLE], SIMPLE),
        Variant::SNL => (vec![SIMPLE_LONG, SIMPLE_LONG], SIMPLE_LONG),
        Variant::SNB => (vec![SIMPLE_BRANCHY, SIMPLE_BRANCHY], SIMPLE_BRANCHY),
    };
    let mut classes = base;
    while classes.len() < feeder_count {
        classes.push(extra);
    }
    classes.truncate(feeder_count);
    classes
}

fn line_impedance(length_m: f64) -> [Impedance; 3] {
    let z = Impedance::new(
        OHMS_PER_KM_R * length_m / 1000.0,
        OHMS_PER_KM_X * length_m / 1000.0,
    );
    [z; 3]
}

/// Non-uniform phase shares; pairwise counts differ by >= 20%.
const PHASE_SHARES: [f64; 2] = [0.45, 0.33];

fn phase_counts(n: usize) -> [usize; 3] {
    let a = ((n as f64) * PHASE_SHARES[0]).round() as usize;
    let b = ((n as f64) * PHASE_SHARES[1]).round() as usize;
    let a = a.min(n);
    let b = b.min(n - a);
    [a, b, n - a - b]
}

/// Builds a labeled radial network for the template. Deterministic in
/// (template, seed).
pub fn build_network(tmpl: &NetworkTemplate, rng_seed: u64) -> Result<NetworkTopology> {
    tmpl.validate()?;
    let mut rng = rng_for(rng_seed, "network");
    let classes = feeder_classes(tmpl.variant, tmpl.feeder_count);

    let shared_bus = tmpl.shared_secondary_bus;
    let source_impedance = if shared_bus {
        tmpl.transformer_impedance
    } else {
        Impedance::zero()
    };
    let mut topo = NetworkTopology {
        transformers: vec![Transformer {
            id: "T1".into(),
            nominal_phase_v: [NOMINAL_PHASE_V; 3],
            source_impedance,
        }],
        feeders: Vec::new(),
        nodes: Vec::new(),
        lines: Vec::new(),
        meters: BTreeMap::new(),
        switch_bars: Vec::new(),
    };

    for (fi, class) in classes.iter().enumerate() {
        let feeder_id = format!("F{}", fi + 1);
        topo.feeders.push(Feeder { id: feeder_id.clone(), transformer: "T1".into() });
        build_feeder(tmpl, class, &feeder_id, &mut topo, &mut rng)?;
    }
    Ok(topo)
}

fn build_feeder(
    tmpl: &NetworkTemplate,
    class: &FeederClass,
    feeder_id: &str,
    topo: &mut NetworkTopology,
    rng: &mut impl Rng,
) -> Result<()> {
    let node_id = |n: usize| format!("{feeder_id}_n{n:03}");
    let stub_id = |n: usize| format!("{feeder_id}_s{n:03}");
    let mut next_node = 0usize;

    // Main line: transformer -> root line -> chain of main nodes. Without a
    // shared secondary bus the transformer impedance folds into the root line.
    let mut chain: Vec<(String, f64)> = Vec::new(); // (node id, distance from root)
    let mut prev = "T1".to_string();
    let mut dist = 0.0;
    for k in 0..class.main_segments {
        let len = if k == 0 { class.root_len_m } else { class.spacing_m };
        dist += len;
        let id = node_id(next_node);
        next_node += 1;
        let mut impedance = line_impedance(len);
        if k == 0 && !tmpl.shared_secondary_bus {
            for z in impedance.iter_mut() {
                z.r_ohms += tmpl.transformer_impedance.r_ohms;
                z.x_ohms += tmpl.transformer_impedance.x_ohms;
            }
        }
        topo.lines.push(Line {
            from: prev.clone(),
            to: id.clone(),
            length_m: len,
            impedance,
        });
        chain.push((id.clone(), dist));
        prev = id;
    }

    // Branches hanging off distinct main nodes, spread along the line.
    let mut branch_roots: Vec<usize> = (1..class.main_segments).collect();
    branch_roots.shuffle(rng);
    branch_roots.truncate(class.branch_count);
    branch_roots.sort_unstable();
    for &main_pos in &branch_roots {
        let (mut prev, mut dist) = chain[main_pos].clone();
        for _ in 0..class.branch_segments {
            dist += class.spacing_m;
            let id = node_id(next_node);
            next_node += 1;
            topo.lines.push(Line {
                from: prev.clone(),
                to: id.clone(),
                length_m: class.spacing_m,
                impedance: line_impedance(class.spacing_m),
            });
            chain.push((id.clone(), dist));
            prev = id;
        }
    }

    // Attach customers.
    let n = tmpl.customers_per_feeder;
    let mut attach: Vec<(String, f64, u32)> = Vec::new(); // node, distance, meter count
    match tmpl.per_node_connection {
        PerNodeConnection::Single => {
            let mut stub = 0usize;
            for c in 0..n {
                let (host, host_dist) = &chain[c % chain.len()];
                let id = stub_id(stub);
                stub += 1;
                topo.lines.push(Line {
                    from: host.clone(),
                    to: id.clone(),
                    length_m: SERVICE_DROP_M,
                    impedance: line_impedance(SERVICE_DROP_M),
                });
                attach.push((id, host_dist + SERVICE_DROP_M, 1));
            }
        }
        PerNodeConnection::Multiple => {
            let lo = ((n + chain.len() - 1) / chain.len()).clamp(2, 6);
            let mut sizes: Vec<usize> = Vec::new();
            let mut remaining = n;
            while remaining > 0 {
                if remaining <= 6 {
                    if remaining == 1 {
                        // steal one from the previous group to avoid a singleton
                        if let Some(last) = sizes.last_mut() {
                            *last -= 1;
                            remaining += 1;
                        }
                    }
                    sizes.push(remaining.max(1).min(6));
                    break;
                }
                let hi = 6.min(remaining - 2).max(lo);
                let s = rng.gen_range(lo..=hi);
                sizes.push(s);
                remaining -= s;
            }
            if sizes.len() > chain.len() {
                return Err(Error::Config(format!(
                    "feeder {feeder_id}: {} meter groups exceed {} candidate nodes",
                    sizes.len(),
                    chain.len()
                )));
            }
            // Spread groups over the chain.
            let mut hosts: Vec<usize> = (0..chain.len()).collect();
            hosts.shuffle(rng);
            hosts.truncate(sizes.len());
            hosts.sort_unstable();
            for (g, &host) in sizes.iter().zip(&hosts) {
                let (id, d) = &chain[host];
                attach.push((id.clone(), *d, *g as u32));
            }
        }
    }

    // Record nodes; chain nodes without meters have connection count 0.
    let with_meters: BTreeMap<&str, u32> =
        attach.iter().map(|(id, _, c)| (id.as_str(), *c)).collect();
    for (id, d) in &chain {
        topo.nodes.push(Node {
            id: id.clone(),
            feeder: feeder_id.into(),
            distance_m: *d,
            connections: with_meters.get(id.as_str()).copied().unwrap_or(0),
        });
    }
    if matches!(tmpl.per_node_connection, PerNodeConnection::Single) {
        for (id, d, c) in &attach {
            topo.nodes.push(Node {
                id: id.clone(),
                feeder: feeder_id.into(),
                distance_m: *d,
                connections: *c,
            });
        }
    }

    // Phase assignment over this feeder's meters.
    let mut phases: Vec<PhaseLabel> = match tmpl.phase_mode {
        PhaseMode::SinglePhase => vec![PhaseLabel::A; n],
        PhaseMode::ThreePhaseNonUniform => {
            let counts = phase_counts(n);
            let mut v = Vec::with_capacity(n);
            for (p, &c) in counts.iter().enumerate() {
                v.extend(std::iter::repeat(PhaseLabel::from_index(p)).take(c));
            }
            v.shuffle(rng);
            v
        }
    };

    let mut meter_no = 0usize;
    for (node, _, count) in &attach {
        for _ in 0..*count {
            let meter_id = format!("{feeder_id}_m{:03}", meter_no);
            meter_no += 1;
            topo.meters.insert(
                meter_id,
                MeterInfo {
                    node: node.clone(),
                    phase: phases.pop().unwrap(),
                    feeder: feeder_id.into(),
                },
            );
        }
    }
    Ok(())
}

/// Per-feeder switch semantics: switch `i` closed routes feeder `i` to the
/// primary source; open routes it to the backup source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchSpec {
    pub state_catalog: Vec<Vec<u8>>,
    /// Dwell time range in timesteps.
    pub dwell_range: (usize, usize),
    /// Optional class weights producing imbalance.
    pub bias: Option<Vec<f64>>,
    /// Relative tap of the primary source.
    pub primary_tap: f64,
    /// Relative tap of the backup source.
    pub backup_tap: f64,
}

impl Default for SwitchSpec {
    fn default() -> Self {
        Self {
            state_catalog: vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]],
            dwell_range: (96, 384),
            bias: None,
            primary_tap: 0.0035,
            backup_tap: -0.0035,
        }
    }
}

pub const PRIMARY_SOURCE: &str = "T1";
pub const BACKUP_SOURCE: &str = "T2";

/// Adds the switch bar and its backup source to a built network.
/// One switch per feeder; the catalog is user-supplied.
pub fn attach_switch_bar(topo: &mut NetworkTopology, spec: &SwitchSpec) -> Result<SwitchBar> {
    let feeder_ids: Vec<String> = topo.feeder_ids();
    let switch_count = feeder_ids.len();
    if spec.state_catalog.is_empty() {
        return Err(Error::Config("state catalog must not be empty".into()));
    }
    for s in &spec.state_catalog {
        if s.len() != switch_count {
            return Err(Error::Config(format!(
                "state {s:?} length {} differs from feeder count {switch_count}",
                s.len()
            )));
        }
        if s.iter().any(|&b| b > 1) {
            return Err(Error::Config(format!("state {s:?} has non-binary entries")));
        }
    }
    let primary = NOMINAL_PHASE_V * (1.0 + spec.primary_tap);
    let backup = NOMINAL_PHASE_V * (1.0 + spec.backup_tap);
    for t in topo.transformers.iter_mut() {
        if t.id == PRIMARY_SOURCE {
            t.nominal_phase_v = [primary; 3];
        }
    }
    topo.transformers.push(Transformer {
        id: BACKUP_SOURCE.into(),
        nominal_phase_v: [backup; 3],
        source_impedance: Impedance::zero(),
    });
    let bar = SwitchBar::new("BAR1", switch_count, feeder_ids, spec.state_catalog.clone());
    topo.switch_bars.push(bar.clone());
    Ok(bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_topology;

    fn template(variant: Variant) -> NetworkTemplate {
        NetworkTemplate::new(
            variant,
            2,
            49,
            PerNodeConnection::Single,
            PhaseMode::SinglePhase,
        )
    }

    fn tree_depth(topo: &NetworkTopology, feeder: &str) -> usize {
        // longest hop path from the transformer within one feeder
        let mut adj: std::collections::HashMap<&str, Vec<&str>> = Default::default();
        for l in &topo.lines {
            adj.entry(l.from.as_str()).or_default().push(l.to.as_str());
        }
        fn depth(adj: &std::collections::HashMap<&str, Vec<&str>>, at: &str, feeder: &str) -> usize {
            adj.get(at)
                .into_iter()
                .flatten()
                .filter(|n| n.starts_with(feeder))
                .map(|n| 1 + depth(adj, n, feeder))
                .max()
                .unwrap_or(0)
        }
        depth(&adj, "T1", feeder)
    }

    #[test]
    fn generated_networks_are_valid_for_all_variants() {
        for variant in [Variant::CN1, Variant::CN2, Variant::SN, Variant::SNL, Variant::SNB] {
            for per_node in [PerNodeConnection::Single, PerNodeConnection::Multiple] {
                for phases in [PhaseMode::SinglePhase, PhaseMode::ThreePhaseNonUniform] {
                    let mut tmpl = template(variant);
                    tmpl.per_node_connection = per_node;
                    tmpl.phase_mode = phases;
                    tmpl.feeder_count = 3;
                    let topo = build_network(&tmpl, 7).unwrap();
                    let violations = validate_topology(&topo);
                    assert!(violations.is_empty(), "{variant:?}: {violations:?}");
                    assert_eq!(topo.meters.len(), 3 * 49);
                }
            }
        }
    }

    #[test]
    fn sn_two_feeder_single_counts_and_depth() {
        let topo = build_network(&template(Variant::SN), 3).unwrap();
        assert_eq!(topo.feeders.len(), 2);
        assert_eq!(topo.meters.len(), 98);
        for f in ["F1", "F2"] {
            assert_eq!(topo.meters_of_feeder(f).len(), 49);
        }
        let cn1 = build_network(&template(Variant::CN1), 3).unwrap();
        assert!(tree_depth(&topo, "F1") <= tree_depth(&cn1, "F1"));
    }

    #[test]
    fn same_seed_same_topology() {
        let t = template(Variant::CN1);
        assert_eq!(build_network(&t, 42).unwrap(), build_network(&t, 42).unwrap());
        assert_ne!(build_network(&t, 42).unwrap(), build_network(&t, 43).unwrap());
    }

    #[test]
    fn snb_has_strictly_more_branches_than_sn() {
        let sn = build_network(&template(Variant::SN), 5).unwrap();
        let snb = build_network(&template(Variant::SNB), 5).unwrap();
        // branch count shows up as extra junction fan-out on main nodes
        let fanout = |topo: &NetworkTopology| {
            let mut per_node: std::collections::HashMap<&str, usize> = Default::default();
            for l in &topo.lines {
                if l.to.contains("_n") {
                    *per_node.entry(l.from.as_str()).or_default() += 1;
                }
            }
            per_node.values().filter(|&&c| c > 1).count()
        };
        assert!(fanout(&snb) > fanout(&sn));
    }

    #[test]
    fn three_phase_counts_are_non_uniform() {
        let mut tmpl = template(Variant::SN);
        tmpl.phase_mode = PhaseMode::ThreePhaseNonUniform;
        let topo = build_network(&tmpl, 11).unwrap();
        for f in ["F1", "F2"] {
            let mut counts = [0usize; 3];
            for m in topo.meters_of_feeder(f) {
                counts[topo.meters[&m].phase.index().unwrap()] += 1;
            }
            let mut sorted = counts;
            sorted.sort_unstable();
            assert_eq!(counts.iter().sum::<usize>(), 49);
            // pairwise gaps of at least 20% of the larger count
            assert!(sorted[0] as f64 <= 0.8 * sorted[1] as f64, "{counts:?}");
            assert!(sorted[1] as f64 <= 0.8 * sorted[2] as f64, "{counts:?}");
        }
    }

    #[test]
    fn multiple_mode_groups_meters_2_to_6_per_node() {
        let mut tmpl = template(Variant::SN);
        tmpl.per_node_connection = PerNodeConnection::Multiple;
        let topo = build_network(&tmpl, 13).unwrap();
        let mut with_meters = 0;
        for node in &topo.nodes {
            if node.connections > 0 {
                assert!((2..=6).contains(&(node.connections as usize)), "{node:?}");
                with_meters += 1;
            }
        }
        assert!(with_meters >= 49 / 6);
    }

    #[test]
    fn switch_bar_attaches_backup_source() {
        let mut tmpl = template(Variant::SN);
        tmpl.feeder_count = 3;
        let mut topo = build_network(&tmpl, 1).unwrap();
        let bar = attach_switch_bar(&mut topo, &SwitchSpec::default()).unwrap();
        assert_eq!(bar.switch_count, 3);
        assert_eq!(bar.class_count(), 3);
        assert_eq!(topo.transformers.len(), 2);
        assert!(validate_topology(&topo).is_empty());
        // mismatched catalog rejected
        let mut topo2 = build_network(&template(Variant::SN), 1).unwrap();
        let bad = SwitchSpec { state_catalog: vec![vec![1, 0, 1]], ..Default::default() };
        assert!(attach_switch_bar(&mut topo2, &bad).is_err());
    }
}
