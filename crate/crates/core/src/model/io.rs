//! File formats: topology JSON, voltage-panel CSV, label-set JSON,
//! switch-schedule CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::model::{LabelSet, MeterId, NetworkTopology, VoltagePanel};

const TIME_FMT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn save_topology(path: &Path, topo: &NetworkTopology) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, topo)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_topology(path: &Path) -> Result<NetworkTopology> {
    let f = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}

pub fn save_labels(path: &Path, labels: &LabelSet) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, labels)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_labels(path: &Path) -> Result<LabelSet> {
    let f = BufReader::new(File::open(path)?);
    let labels: LabelSet = serde_json::from_reader(f)?;
    labels.validate()?;
    Ok(labels)
}

/// Writes the panel as CSV: ISO-8601 timestamp column, one column per meter,
/// empty cell = missing.
pub fn save_panel_csv(path: &Path, panel: &VoltagePanel, meter_ids: &[MeterId]) -> Result<()> {
    if meter_ids.len() != panel.meters() {
        return Err(Error::DimensionMismatch {
            expected: panel.meters(),
            got: meter_ids.len(),
        });
    }
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "timestamp")?;
    for id in meter_ids {
        write!(f, ",{id}")?;
    }
    writeln!(f)?;
    for t in 0..panel.steps() {
        write!(f, "{}", panel.timestamp(t)?.format(TIME_FMT))?;
        for n in 0..panel.meters() {
            match panel.get(n, t) {
                Some(v) => write!(f, ",{v}")?,
                None => write!(f, ",")?,
            }
        }
        writeln!(f)?;
    }
    Ok(())
}

/// Reads a panel CSV; returns the panel and the meter column order.
pub fn load_panel_csv(path: &Path) -> Result<(VoltagePanel, Vec<MeterId>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || &headers[0] != "timestamp" {
        return Err(Error::Parse("panel CSV must start with a 'timestamp' column".into()));
    }
    let meter_ids: Vec<MeterId> = headers.iter().skip(1).map(str::to_string).collect();
    if meter_ids.is_empty() {
        return Err(Error::Parse("panel CSV has no meter columns".into()));
    }

    let mut timestamps: Vec<NaiveDateTime> = Vec::new();
    let mut cells: Vec<Option<f64>> = Vec::new(); // row-major: step × meter
    for record in rdr.records() {
        let record = record?;
        let ts = NaiveDateTime::parse_from_str(&record[0], TIME_FMT)
            .map_err(|e| Error::Parse(format!("bad timestamp '{}': {e}", &record[0])))?;
        timestamps.push(ts);
        for cell in record.iter().skip(1) {
            if cell.is_empty() {
                cells.push(None);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad voltage '{cell}': {e}")))?;
                cells.push(Some(v));
            }
        }
    }
    if timestamps.is_empty() {
        return Err(Error::EmptyInput);
    }

    let start = timestamps[0];
    // Resolution = smallest positive gap; offsets must land on that grid.
    let resolution_minutes = if timestamps.len() > 1 {
        let mut min_gap = i64::MAX;
        for w in timestamps.windows(2) {
            let gap = (w[1] - w[0]).num_minutes();
            if gap <= 0 {
                return Err(Error::Parse("timestamps must be strictly increasing".into()));
            }
            min_gap = min_gap.min(gap);
        }
        u32::try_from(min_gap).map_err(|_| Error::Parse("timestamp gap too large".into()))?
    } else {
        15
    };
    let mut offsets = Vec::with_capacity(timestamps.len());
    for ts in &timestamps {
        let minutes = (*ts - start).num_minutes();
        if minutes % resolution_minutes as i64 != 0 {
            return Err(Error::Parse(format!(
                "timestamp {ts} is off the {resolution_minutes}-minute grid"
            )));
        }
        offsets.push((minutes / resolution_minutes as i64) as u64);
    }

    let steps = timestamps.len();
    let meters = meter_ids.len();
    let mut values = vec![0.0f64; meters * steps];
    let mut mask = vec![false; meters * steps];
    for t in 0..steps {
        for n in 0..meters {
            if let Some(v) = cells[t * meters + n] {
                values[n * steps + t] = v;
                mask[n * steps + t] = true;
            }
        }
    }
    let panel = VoltagePanel::new(values, mask, meters, steps, resolution_minutes, start)?
        .with_offsets(offsets)?;
    Ok((panel, meter_ids))
}

/// Writes per-timestep class labels for one or more bars:
/// timestamp column, then one column per bar id.
pub fn save_switch_schedule(
    path: &Path,
    panel: &VoltagePanel,
    bars: &[(String, Vec<u32>)],
) -> Result<()> {
    for (bar, labels) in bars {
        if labels.len() != panel.steps() {
            return Err(Error::Config(format!(
                "schedule for bar {bar} has {} labels for {} steps",
                labels.len(),
                panel.steps()
            )));
        }
    }
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "timestamp")?;
    for (bar, _) in bars {
        write!(f, ",{bar}")?;
    }
    writeln!(f)?;
    for t in 0..panel.steps() {
        write!(f, "{}", panel.timestamp(t)?.format(TIME_FMT))?;
        for (_, labels) in bars {
            write!(f, ",{}", labels[t])?;
        }
        writeln!(f)?;
    }
    Ok(())
}

pub fn load_switch_schedule(path: &Path) -> Result<Vec<(String, Vec<u32>)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let bar_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut columns: Vec<Vec<u32>> = vec![Vec::new(); bar_ids.len()];
    for record in rdr.records() {
        let record = record?;
        for (i, cell) in record.iter().skip(1).enumerate() {
            let v: u32 = cell
                .parse()
                .map_err(|e| Error::Parse(format!("bad switch label '{cell}': {e}")))?;
            columns[i].push(v);
        }
    }
    Ok(bar_ids.into_iter().zip(columns).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::topology::tests_support::tiny_topology;
    use chrono::NaiveDate;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2024, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    #[test]
    fn topology_roundtrip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("topo.json");
        let topo = tiny_topology();
        save_topology(&path, &topo).unwrap();
        let back = load_topology(&path).unwrap();
        assert_eq!(topo, back);
    }

    #[test]
    fn panel_roundtrip_with_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        let values = vec![230.0, 231.5, 229.25, 230.125, 228.0, 232.0];
        let mask = vec![true, false, true, true, true, true];
        let panel = VoltagePanel::new(values, mask, 2, 3, 15, start()).unwrap();
        let ids = vec!["m001".to_string(), "m002".to_string()];
        save_panel_csv(&path, &panel, &ids).unwrap();
        let (back, back_ids) = load_panel_csv(&path).unwrap();
        assert_eq!(back_ids, ids);
        assert_eq!(back.meters(), panel.meters());
        assert_eq!(back.steps(), panel.steps());
        assert_eq!(back.resolution_minutes(), panel.resolution_minutes());
        assert_eq!(back.start(), panel.start());
        for n in 0..panel.meters() {
            for t in 0..panel.steps() {
                assert_eq!(back.get(n, t), panel.get(n, t));
            }
        }
    }

    #[test]
    fn labels_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.json");
        let mut ls = LabelSet::new();
        ls.insert_known("m001", "F1");
        ls.insert_unknown("m002");
        save_labels(&path, &ls).unwrap();
        assert_eq!(load_labels(&path).unwrap(), ls);
    }

    #[test]
    fn schedule_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("switch.csv");
        let panel = VoltagePanel::new(vec![230.0; 4], vec![true; 4], 1, 4, 15, start()).unwrap();
        let bars = vec![("B1".to_string(), vec![0, 0, 1, 2])];
        save_switch_schedule(&path, &panel, &bars).unwrap();
        assert_eq!(load_switch_schedule(&path).unwrap(), bars);
    }
}
