//! Dataset corruption: missing-data and measurement-noise injection.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VoltagePanel;
use crate::seed::rng_for;
use crate::select::sample_indices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingMode {
    RandomPoints,
    WholeMeters,
}

/// Clears the mask on exactly ⌊fraction·N·T⌋ cells (random points) or on all
/// columns of ⌊fraction·N⌋ meters. Values under the mask stay untouched.
pub fn inject_missing(
    panel: &VoltagePanel,
    fraction: f64,
    mode: MissingMode,
    rng_seed: u64,
) -> Result<VoltagePanel> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("missing fraction {fraction} outside [0, 1)")));
    }
    if fraction == 0.0 {
        return Ok(panel.clone());
    }
    let n = panel.meters();
    let t = panel.steps();
    let mut rng = rng_for(rng_seed, "inject_missing");
    let cells: Vec<usize> = match mode {
        MissingMode::RandomPoints => {
            let count = (fraction * (n * t) as f64).floor() as usize;
            sample_indices(n * t, count, &mut rng)
        }
        MissingMode::WholeMeters => {
            let count = (fraction * n as f64).floor() as usize;
            let meters = sample_indices(n, count, &mut rng);
            meters
                .into_iter()
                .flat_map(|m| (0..t).map(move |c| m * t + c))
                .collect()
        }
    };
    Ok(panel.with_cells_masked(&cells))
}

/// Adds independent zero-mean Gaussian noise to observed cells only.
pub fn inject_noise(panel: &VoltagePanel, sd_volts: f64, rng_seed: u64) -> Result<VoltagePanel> {
    if sd_volts < 0.0 {
        return Err(Error::Config("noise SD must be >= 0".into()));
    }
    if sd_volts == 0.0 {
        return Ok(panel.clone());
    }
    let mut rng = rng_for(rng_seed, "inject_noise");
    let noise = Normal::new(0.0, sd_volts).unwrap();
    Ok(panel.map_observed(|_, _, v| v + noise.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn panel(n: usize, t: usize) -> VoltagePanel {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        VoltagePanel::new(vec![230.0; n * t], vec![true; n * t], n, t, 15, start).unwrap()
    }

    #[test]
    fn zero_fraction_is_identity() {
        let p = panel(4, 10);
        assert_eq!(inject_missing(&p, 0.0, MissingMode::RandomPoints, 1).unwrap(), p);
    }

    #[test]
    fn random_points_masks_exact_count() {
        let p = panel(10, 100);
        let q = inject_missing(&p, 0.5, MissingMode::RandomPoints, 7).unwrap();
        assert_eq!(q.observed_count(), 500);
        // values untouched under the mask
        for m in 0..10 {
            for t in 0..100 {
                assert_eq!(q.value(m, t), 230.0);
            }
        }
    }

    #[test]
    fn whole_meters_clears_rows() {
        let p = panel(10, 20);
        let q = inject_missing(&p, 0.3, MissingMode::WholeMeters, 3).unwrap();
        let empty_rows = (0..10).filter(|&m| q.observed_in_row(m) == 0).count();
        assert_eq!(empty_rows, 3);
        assert_eq!(q.observed_count(), 7 * 20);
    }

    #[test]
    fn same_seed_same_mask() {
        let p = panel(6, 50);
        let a = inject_missing(&p, 0.25, MissingMode::RandomPoints, 11).unwrap();
        let b = inject_missing(&p, 0.25, MissingMode::RandomPoints, 11).unwrap();
        assert_eq!(a, b);
        let c = inject_missing(&p, 0.25, MissingMode::RandomPoints, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_zero_sd_unchanged_and_masked_cells_untouched() {
        let p = panel(3, 30);
        assert_eq!(inject_noise(&p, 0.0, 5).unwrap(), p);
        let holey = inject_missing(&p, 0.4, MissingMode::RandomPoints, 2).unwrap();
        let noisy = inject_noise(&holey, 0.5, 5).unwrap();
        for m in 0..3 {
            for t in 0..30 {
                if !holey.is_observed(m, t) {
                    assert_eq!(noisy.value(m, t), holey.value(m, t));
                }
            }
        }
    }

    #[test]
    fn noise_sample_mean_stays_near_truth() {
        // mean over N·T cells within 3 sigma / sqrt(N·T) of 230
        let p = panel(20, 500);
        let sd = 0.1;
        let noisy = inject_noise(&p, sd, 9).unwrap();
        let total: f64 = (0..20)
            .flat_map(|m| (0..500).map(move |t| (m, t)))
            .map(|(m, t)| noisy.value(m, t))
            .sum();
        let mean = total / 10_000.0;
        let bound = 3.0 * sd / (10_000.0f64).sqrt();
        assert!((mean - 230.0).abs() < bound, "mean {mean}");
    }
}
