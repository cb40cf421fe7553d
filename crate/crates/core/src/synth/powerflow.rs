//! Three-phase radial power flow by backward/forward sweep.
//!
//! Each phase is an independent series circuit (no mutual coupling). The
//! sweep iterates constant-power injections to a fixed point; feeders that
//! share a transformer with nonzero source impedance couple through the
//! busbar voltage in an outer loop.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDateTime;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{MeterId, NetworkTopology, VoltagePanel};
use crate::synth::profiles::Injections;

const TOLERANCE_PU: f64 = 1e-9;
const MAX_ITERATIONS: usize = 100;

/// Indexed single-feeder tree, root first in `order`.
struct FeederView {
    feeder_id: String,
    node_ids: Vec<String>,
    parent: Vec<usize>, // parent[0] == 0 (root attaches to the source)
    z: Vec<[Complex64; 3]>,
    order: Vec<usize>,
    /// (panel row, phase index) per node.
    meters_at: Vec<Vec<(usize, usize)>>,
}

struct SourceGroup {
    tx_id: String,
    emf: [f64; 3],
    z_source: Complex64,
    feeders: Vec<FeederView>,
}

fn build_views(
    topo: &NetworkTopology,
    meter_rows: &BTreeMap<MeterId, usize>,
) -> Result<Vec<SourceGroup>> {
    let mut adj: HashMap<&str, Vec<(usize, &str)>> = HashMap::new();
    for (li, line) in topo.lines.iter().enumerate() {
        adj.entry(line.from.as_str()).or_default().push((li, line.to.as_str()));
        adj.entry(line.to.as_str()).or_default().push((li, line.from.as_str()));
    }
    let node_feeder: HashMap<&str, &str> = topo
        .nodes
        .iter()
        .map(|n| (n.id.as_str(), n.feeder.as_str()))
        .collect();

    let mut groups: BTreeMap<&str, Vec<FeederView>> = BTreeMap::new();
    for feeder in &topo.feeders {
        let members: Vec<&str> = topo
            .nodes
            .iter()
            .filter(|n| n.feeder == feeder.id)
            .map(|n| n.id.as_str())
            .collect();
        if members.is_empty() {
            continue;
        }
        let index: HashMap<&str, usize> =
            members.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut parent = vec![usize::MAX; members.len()];
        let mut z = vec![[Complex64::new(0.0, 0.0); 3]; members.len()];
        let mut order = Vec::with_capacity(members.len());
        // A tree has exactly one line per node (counting the root line).
        let feeder_edges = topo
            .lines
            .iter()
            .filter(|l| {
                node_feeder.get(l.from.as_str()) == Some(&feeder.id.as_str())
                    || node_feeder.get(l.to.as_str()) == Some(&feeder.id.as_str())
            })
            .count();
        if feeder_edges != members.len() {
            return Err(Error::NotRadial(format!(
                "feeder {}: {} lines for {} nodes",
                feeder.id,
                feeder_edges,
                members.len()
            )));
        }
        // BFS from the transformer through this feeder's nodes.
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(feeder.transformer.as_str());
        let mut seen: HashMap<&str, bool> = HashMap::new();
        seen.insert(feeder.transformer.as_str(), true);
        while let Some(at) = queue.pop_front() {
            for &(li, to) in adj.get(at).into_iter().flatten() {
                if node_feeder.get(to) != Some(&feeder.id.as_str()) || seen.contains_key(to) {
                    continue;
                }
                seen.insert(to, true);
                let ni = index[to];
                // the root node's parent is itself; its z carries the root line
                parent[ni] = if at == feeder.transformer { ni } else { index[at] };
                let line = &topo.lines[li];
                for ph in 0..3 {
                    z[ni][ph] = Complex64::new(
                        line.impedance[ph].r_ohms,
                        line.impedance[ph].x_ohms,
                    );
                }
                order.push(ni);
                queue.push_back(to);
            }
        }
        if order.len() != members.len() {
            return Err(Error::NotRadial(format!(
                "feeder {}: {} of {} nodes reachable from {}",
                feeder.id,
                order.len(),
                members.len(),
                feeder.transformer
            )));
        }

        let mut meters_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); members.len()];
        for (meter, info) in &topo.meters {
            if info.feeder != feeder.id {
                continue;
            }
            let Some(&ni) = index.get(info.node.as_str()) else { continue };
            let Some(ph) = info.phase.index() else {
                return Err(Error::Config(format!(
                    "meter {meter} is labeled three-phase; represent it as three single-phase meters"
                )));
            };
            meters_at[ni].push((meter_rows[meter], ph));
        }

        groups.entry(feeder.transformer.as_str()).or_default().push(FeederView {
            feeder_id: feeder.id.clone(),
            node_ids: members.iter().map(|s| s.to_string()).collect(),
            parent,
            z,
            order,
            meters_at,
        });
    }

    let mut out = Vec::new();
    for (tx_id, feeders) in groups {
        let tx = topo
            .transformer(tx_id)
            .ok_or_else(|| Error::Config(format!("unknown transformer {tx_id}")))?;
        out.push(SourceGroup {
            tx_id: tx_id.to_string(),
            emf: tx.nominal_phase_v,
            z_source: Complex64::new(tx.source_impedance.r_ohms, tx.source_impedance.x_ohms),
            feeders,
        });
    }
    Ok(out)
}

/// One backward/forward sweep solve of a feeder at fixed root voltage.
/// Returns per-node phase voltages and the feeder root current.
fn solve_feeder(
    view: &FeederView,
    v_root: [Complex64; 3],
    s_va: &[[f64; 3]], // per node, per phase, net consumed watts (unity pf applied upstream)
    pf: f64,
    nominal: f64,
) -> Result<(Vec<[Complex64; 3]>, [Complex64; 3])> {
    let n = view.node_ids.len();
    let mut v = vec![v_root; n];
    let tan_phi = (pf.acos()).tan();
    let mut branch_current = vec![[Complex64::new(0.0, 0.0); 3]; n];

    for iteration in 0..MAX_ITERATIONS {
        // Backward: node injection currents, then accumulate up the tree.
        for node in 0..n {
            for ph in 0..3 {
                let p = s_va[node][ph];
                let s = Complex64::new(p, p * tan_phi);
                let vn = v[node][ph];
                branch_current[node][ph] = if s.norm() == 0.0 || vn.norm() < 1.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    (s / vn).conj()
                };
            }
        }
        for &node in view.order.iter().rev() {
            let p = view.parent[node];
            if p != node {
                for ph in 0..3 {
                    let c = branch_current[node][ph];
                    branch_current[p][ph] += c;
                }
            }
        }
        // Forward: update voltages from the root down.
        let mut max_dv = 0.0f64;
        for &node in view.order.iter() {
            let p = view.parent[node];
            let upstream = if p == node { v_root } else { v[p] };
            for ph in 0..3 {
                let new_v = upstream[ph] - view.z[node][ph] * branch_current[node][ph];
                let dv = (new_v - v[node][ph]).norm();
                max_dv = max_dv.max(dv);
                v[node][ph] = new_v;
            }
        }
        if max_dv / nominal < TOLERANCE_PU {
            let root_current = view
                .order
                .iter()
                .filter(|&&node| view.parent[node] == node)
                .fold([Complex64::new(0.0, 0.0); 3], |mut acc, &node| {
                    for ph in 0..3 {
                        acc[ph] += branch_current[node][ph];
                    }
                    acc
                });
            return Ok((v, root_current));
        }
        if iteration == MAX_ITERATIONS - 1 {
            // find the node with the largest residual for the diagnostic
            let mut worst = (0usize, 0.0f64);
            for &node in view.order.iter() {
                let p = view.parent[node];
                let upstream = if p == node { v_root } else { v[p] };
                for ph in 0..3 {
                    let res =
                        (upstream[ph] - view.z[node][ph] * branch_current[node][ph] - v[node][ph])
                            .norm();
                    if res > worst.1 {
                        worst = (node, res);
                    }
                }
            }
            return Err(Error::PowerFlowDiverged {
                node: view.node_ids[worst.0].clone(),
                iterations: MAX_ITERATIONS,
                residual: worst.1 / nominal,
            });
        }
    }
    unreachable!()
}

/// Optional per-feeder EMF override for one timestep (switch-state supply).
pub type FeederEmf<'a> = &'a BTreeMap<String, Vec<f64>>;

/// Solves every timestep and returns the magnitude panel, meters in sorted-id
/// order. `source_scale` maps transformer id to a per-step multiplier on its
/// nominal voltage (MV variation); `feeder_emf` overrides the root EMF of
/// individual feeders per step.
pub fn solve_panel(
    topo: &NetworkTopology,
    inj: &Injections,
    resolution_minutes: u32,
    start: NaiveDateTime,
    power_factor: f64,
    source_scale: Option<&BTreeMap<String, Vec<f64>>>,
    feeder_emf: Option<FeederEmf>,
) -> Result<VoltagePanel> {
    let meter_ids = topo.meter_ids();
    if inj.meters != meter_ids.len() {
        return Err(Error::DimensionMismatch { expected: meter_ids.len(), got: inj.meters });
    }
    let meter_rows: BTreeMap<MeterId, usize> = meter_ids
        .iter()
        .enumerate()
        .map(|(i, m)| (m.clone(), i))
        .collect();
    let mut groups = build_views(topo, &meter_rows)?;
    let steps = inj.steps;
    let nominal = groups
        .iter()
        .map(|g| g.emf[0])
        .fold(0.0f64, f64::max)
        .max(1.0);

    let mut values = vec![0.0f64; meter_ids.len() * steps];

    // Node power per view gets rebuilt each step.
    for t in 0..steps {
        for group in groups.iter_mut() {
            let tx_scale = source_scale
                .and_then(|m| m.get(&group.tx_id))
                .map(|tr| tr[t])
                .unwrap_or(1.0);
            let base_emf = [
                Complex64::new(group.emf[0] * tx_scale, 0.0),
                Complex64::new(group.emf[1] * tx_scale, 0.0),
                Complex64::new(group.emf[2] * tx_scale, 0.0),
            ];

            // Per-feeder net consumed power per node per phase.
            let mut node_power: Vec<Vec<[f64; 3]>> = Vec::with_capacity(group.feeders.len());
            for view in &group.feeders {
                let mut s = vec![[0.0f64; 3]; view.node_ids.len()];
                for (node, meters) in view.meters_at.iter().enumerate() {
                    for &(row, ph) in meters {
                        s[node][ph] += (inj.load(row, t) - inj.pv(row, t)) * 1000.0;
                    }
                }
                node_power.push(s);
            }

            // Feeders with an EMF override solve standalone.
            let mut coupled: Vec<usize> = Vec::new();
            for (fi, view) in group.feeders.iter().enumerate() {
                let emf_override = feeder_emf.and_then(|m| m.get(&view.feeder_id));
                if let Some(trace) = emf_override {
                    let e = Complex64::new(trace[t], 0.0);
                    let (volts, _) =
                        solve_feeder(view, [e, e, e], &node_power[fi], power_factor, nominal)?;
                    store_meter_voltages(view, &volts, t, steps, &mut values);
                } else {
                    coupled.push(fi);
                }
            }
            if coupled.is_empty() {
                continue;
            }

            if group.z_source.norm() == 0.0 {
                for &fi in &coupled {
                    let view = &group.feeders[fi];
                    let (volts, _) =
                        solve_feeder(view, base_emf, &node_power[fi], power_factor, nominal)?;
                    store_meter_voltages(view, &volts, t, steps, &mut values);
                }
            } else {
                // Shared busbar: iterate bar voltage with the total current.
                let mut v_bar = base_emf;
                let mut solutions: Vec<Vec<[Complex64; 3]>> = Vec::new();
                for outer in 0..MAX_ITERATIONS {
                    solutions.clear();
                    let mut total = [Complex64::new(0.0, 0.0); 3];
                    for &fi in &coupled {
                        let view = &group.feeders[fi];
                        let (volts, root_i) =
                            solve_feeder(view, v_bar, &node_power[fi], power_factor, nominal)?;
                        for ph in 0..3 {
                            total[ph] += root_i[ph];
                        }
                        solutions.push(volts);
                    }
                    let mut max_dv = 0.0f64;
                    for ph in 0..3 {
                        let new_v = base_emf[ph] - group.z_source * total[ph];
                        max_dv = max_dv.max((new_v - v_bar[ph]).norm());
                        v_bar[ph] = new_v;
                    }
                    if max_dv / nominal < TOLERANCE_PU {
                        break;
                    }
                    if outer == MAX_ITERATIONS - 1 {
                        return Err(Error::PowerFlowDiverged {
                            node: format!("busbar of {}", group.tx_id),
                            iterations: MAX_ITERATIONS,
                            residual: max_dv / nominal,
                        });
                    }
                }
                for (k, &fi) in coupled.iter().enumerate() {
                    store_meter_voltages(&group.feeders[fi], &solutions[k], t, steps, &mut values);
                }
            }
        }
    }

    VoltagePanel::new(
        values,
        vec![true; meter_ids.len() * steps],
        meter_ids.len(),
        steps,
        resolution_minutes,
        start,
    )
}

fn store_meter_voltages(
    view: &FeederView,
    volts: &[[Complex64; 3]],
    t: usize,
    steps: usize,
    values: &mut [f64],
) {
    for (node, meters) in view.meters_at.iter().enumerate() {
        for &(row, ph) in meters {
            values[row * steps + t] = volts[node][ph].norm();
        }
    }
}

/// Spec-level entry point: solves with each transformer's nominal voltage as
/// a fixed slack (no MV variation, no switch overrides).
pub fn solve_power_flow(
    topo: &NetworkTopology,
    inj: &Injections,
    resolution_minutes: u32,
    start: NaiveDateTime,
) -> Result<VoltagePanel> {
    solve_panel(topo, inj, resolution_minutes, start, 1.0, None, None)
}
