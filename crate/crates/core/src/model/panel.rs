//! Voltage-magnitude time-series panel with an explicit missing-value mask.

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 1440;

/// N meters × T timesteps of voltage magnitudes.
///
/// Missing samples are carried in the mask, never as sentinel magnitudes.
/// Columns keep their position on the original sampling grid (`offsets`),
/// so time-of-day lookups stay correct after column selection.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltagePanel {
    values: Vec<f64>, // row-major, meters × steps
    mask: Vec<bool>,
    meters: usize,
    steps: usize,
    resolution_minutes: u32,
    start: NaiveDateTime,
    offsets: Vec<u64>, // grid index of each column
}

impl VoltagePanel {
    /// Builds a panel of raw voltage magnitudes; observed cells must be > 0.
    pub fn new(
        values: Vec<f64>,
        mask: Vec<bool>,
        meters: usize,
        steps: usize,
        resolution_minutes: u32,
        start: NaiveDateTime,
    ) -> Result<Self> {
        let panel = Self::from_derived(values, mask, meters, steps, resolution_minutes, start)?;
        for n in 0..meters {
            for t in 0..steps {
                if panel.is_observed(n, t) && panel.value(n, t) <= 0.0 {
                    return Err(Error::Config(format!(
                        "observed voltage at meter {n}, step {t} is not strictly positive"
                    )));
                }
            }
        }
        Ok(panel)
    }

    /// Builds a panel holding transformed (not raw-volt) data, e.g. z-scores.
    /// Skips the positivity check but keeps every structural invariant.
    pub fn from_derived(
        values: Vec<f64>,
        mask: Vec<bool>,
        meters: usize,
        steps: usize,
        resolution_minutes: u32,
        start: NaiveDateTime,
    ) -> Result<Self> {
        if meters == 0 || steps == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != meters * steps {
            return Err(Error::DimensionMismatch {
                expected: meters * steps,
                got: values.len(),
            });
        }
        if mask.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: mask.len(),
            });
        }
        if resolution_minutes == 0 {
            return Err(Error::Config("resolution_minutes must be positive".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if mask[i] && !v.is_finite() {
                return Err(Error::NonFinite(format!("panel cell {i}")));
            }
        }
        Ok(Self {
            values,
            mask,
            meters,
            steps,
            resolution_minutes,
            start,
            offsets: (0..steps as u64).collect(),
        })
    }

    pub fn meters(&self) -> usize {
        self.meters
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn resolution_minutes(&self) -> u32 {
        self.resolution_minutes
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn columns_per_day(&self) -> u32 {
        MINUTES_PER_DAY / self.resolution_minutes
    }

    #[inline]
    pub fn value(&self, meter: usize, step: usize) -> f64 {
        self.values[meter * self.steps + step]
    }

    #[inline]
    pub fn is_observed(&self, meter: usize, step: usize) -> bool {
        self.mask[meter * self.steps + step]
    }

    /// Observed value, or `None` when the cell is masked.
    pub fn get(&self, meter: usize, step: usize) -> Option<f64> {
        self.is_observed(meter, step).then(|| self.value(meter, step))
    }

    pub fn values_row(&self, meter: usize) -> &[f64] {
        &self.values[meter * self.steps..(meter + 1) * self.steps]
    }

    pub fn mask_row(&self, meter: usize) -> &[bool] {
        &self.mask[meter * self.steps..(meter + 1) * self.steps]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Count of observed cells in one meter's row.
    pub fn observed_in_row(&self, meter: usize) -> usize {
        self.mask_row(meter).iter().filter(|&&m| m).count()
    }

    /// Calendar timestamp of a column.
    pub fn timestamp(&self, step: usize) -> Result<NaiveDateTime> {
        if step >= self.steps {
            return Err(Error::IndexOutOfRange {
                index: step,
                len: self.steps,
            });
        }
        let minutes = self.offsets[step] * self.resolution_minutes as u64;
        Ok(self.start + Duration::minutes(minutes as i64))
    }

    /// Minutes since midnight of a column.
    pub fn time_of_day_index(&self, step: usize) -> Result<u32> {
        if step >= self.steps {
            return Err(Error::IndexOutOfRange {
                index: step,
                len: self.steps,
            });
        }
        let start_minutes =
            self.start.time().hour() as u64 * 60 + self.start.time().minute() as u64;
        let total = start_minutes + self.offsets[step] * self.resolution_minutes as u64;
        Ok((total % MINUTES_PER_DAY as u64) as u32)
    }

    /// Within-day column index of a column (time of day / resolution).
    pub fn day_slot(&self, step: usize) -> Result<u32> {
        Ok(self.time_of_day_index(step)? / self.resolution_minutes)
    }

    /// New panel keeping the given columns, in the given order.
    pub fn restrict_columns(&self, cols: &[usize]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut values = Vec::with_capacity(self.meters * cols.len());
        let mut mask = Vec::with_capacity(self.meters * cols.len());
        let mut offsets = Vec::with_capacity(cols.len());
        for &c in cols {
            if c >= self.steps {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    len: self.steps,
                });
            }
        }
        for n in 0..self.meters {
            for &c in cols {
                values.push(self.value(n, c));
                mask.push(self.is_observed(n, c));
            }
        }
        for &c in cols {
            offsets.push(self.offsets[c]);
        }
        Ok(Self {
            values,
            mask,
            meters: self.meters,
            steps: cols.len(),
            resolution_minutes: self.resolution_minutes,
            start: self.start,
            offsets,
        })
    }

    /// New panel keeping the given meter rows, in the given order.
    pub fn restrict_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut values = Vec::with_capacity(rows.len() * self.steps);
        let mut mask = Vec::with_capacity(rows.len() * self.steps);
        for &r in rows {
            if r >= self.meters {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: self.meters,
                });
            }
            values.extend_from_slice(self.values_row(r));
            mask.extend_from_slice(self.mask_row(r));
        }
        Ok(Self {
            values,
            mask,
            meters: rows.len(),
            steps: self.steps,
            resolution_minutes: self.resolution_minutes,
            start: self.start,
            offsets: self.offsets.clone(),
        })
    }

    /// Grid offsets of the columns (crate-internal plumbing for IO).
    pub(crate) fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub(crate) fn with_offsets(mut self, offsets: Vec<u64>) -> Result<Self> {
        if offsets.len() != self.steps {
            return Err(Error::DimensionMismatch {
                expected: self.steps,
                got: offsets.len(),
            });
        }
        self.offsets = offsets;
        Ok(self)
    }

    /// New panel with the given cells (flat index meter*steps + step) masked out.
    pub(crate) fn with_cells_masked(&self, cells: &[usize]) -> Self {
        let mut out = self.clone();
        for &c in cells {
            out.mask[c] = false;
        }
        out
    }

    /// New panel with a value transform applied to observed cells only.
    pub(crate) fn map_observed(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for n in 0..self.meters {
            for t in 0..self.steps {
                let i = n * self.steps + t;
                if out.mask[i] {
                    out.values[i] = f(n, t, out.values[i]);
                }
            }
        }
        out
    }
}

use chrono::Timelike;

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2024, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    fn flat_panel(meters: usize, steps: usize, v: f64) -> VoltagePanel {
        VoltagePanel::new(
            vec![v; meters * steps],
            vec![true; meters * steps],
            meters,
            steps,
            15,
            start(),
        )
        .unwrap()
    }

    #[test]
    fn time_of_day_examples() {
        let p = flat_panel(1, 96, 230.0);
        assert_eq!(p.time_of_day_index(20).unwrap(), 300);
        assert_eq!(p.time_of_day_index(88).unwrap(), 1320);
        assert_eq!(p.time_of_day_index(0).unwrap(), 0);
    }

    #[test]
    fn time_of_day_out_of_range() {
        let p = flat_panel(1, 96, 230.0);
        assert!(p.time_of_day_index(96).is_err());
    }

    #[test]
    fn column_time_mapping_is_a_bijection_over_one_day() {
        let p = flat_panel(2, 96, 230.0);
        let mut seen = std::collections::BTreeSet::new();
        for t in 0..96 {
            seen.insert(p.time_of_day_index(t).unwrap());
        }
        assert_eq!(seen.len(), 96);
    }

    #[test]
    fn rejects_nonpositive_observed_values() {
        let err = VoltagePanel::new(vec![0.0], vec![true], 1, 1, 15, start());
        assert!(err.is_err());
        // masked cells may hold anything
        assert!(VoltagePanel::new(vec![0.0], vec![false], 1, 1, 15, start()).is_ok());
    }

    #[test]
    fn restriction_keeps_time_mapping() {
        let p = flat_panel(1, 192, 230.0);
        let q = p.restrict_columns(&[100, 191]).unwrap();
        assert_eq!(q.time_of_day_index(0).unwrap(), p.time_of_day_index(100).unwrap());
        assert_eq!(q.time_of_day_index(1).unwrap(), p.time_of_day_index(191).unwrap());
    }
}
