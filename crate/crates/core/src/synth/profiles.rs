//! Load, PV, and MV-side voltage-variation profile generation.

use chrono::{NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Winter,
    Summer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    pub days: usize,
    pub resolution_minutes: u32,
    /// Mean household load scale in kW.
    pub base_load_kw: f64,
    /// Multiplicative load noise SD.
    pub load_noise_sd: f64,
    /// Additive load noise SD in kW (appliance cycling).
    pub load_noise_add_kw: f64,
    /// Fraction of houses with PV.
    pub pv_penetration: f64,
    pub pv_peak_kw: f64,
    pub season: Season,
    /// Amplitude of the shared slow MV sinusoid, as a fraction of nominal.
    pub mv_amplitude: f64,
    /// Innovation SD of the mean-reverting MV walk, fraction of nominal.
    pub mv_walk_sd: f64,
    pub power_factor: f64,
    pub start: NaiveDateTime,
    pub rng_seed: u64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            days: 7,
            resolution_minutes: 15,
            base_load_kw: 0.25,
            load_noise_sd: 0.45,
            load_noise_add_kw: 0.30,
            pv_penetration: 0.0,
            pv_peak_kw: 1.5,
            season: Season::Summer,
            mv_amplitude: 0.01,
            mv_walk_sd: 0.0006,
            power_factor: 1.0,
            start: NaiveDate::from_ymd_opt(2024, 6, 3)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            rng_seed: 0,
        }
    }
}

impl ProfileConfig {
    pub fn steps_per_day(&self) -> usize {
        (24 * 60 / self.resolution_minutes) as usize
    }

    pub fn total_steps(&self) -> usize {
        self.days * self.steps_per_day()
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::Config("days must be >= 1".into()));
        }
        if self.resolution_minutes == 0 || 1440 % self.resolution_minutes != 0 {
            return Err(Error::Config("resolution must divide the day".into()));
        }
        if !(self.base_load_kw > 0.0) {
            return Err(Error::Config("base_load_kw must be > 0".into()));
        }
        if self.load_noise_sd < 0.0 || self.load_noise_add_kw < 0.0 {
            return Err(Error::Config("load noise must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.pv_penetration) {
            return Err(Error::Config("pv_penetration must be in [0, 1]".into()));
        }
        if self.pv_peak_kw < 0.0 {
            return Err(Error::Config("pv_peak_kw must be >= 0".into()));
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(Error::Config("power_factor must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-meter kW series, row-major meters × steps.
#[derive(Debug, Clone)]
pub struct Injections {
    pub load_kw: Vec<f64>,
    pub pv_kw: Vec<f64>,
    pub meters: usize,
    pub steps: usize,
}

impl Injections {
    pub fn load(&self, meter: usize, step: usize) -> f64 {
        self.load_kw[meter * self.steps + step]
    }

    pub fn pv(&self, meter: usize, step: usize) -> f64 {
        self.pv_kw[meter * self.steps + step]
    }

    /// Mean PV and load over meters per timestep (the dynamic-window reference).
    pub fn reference_series(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pv = vec![0.0; self.steps];
        let mut load = vec![0.0; self.steps];
        for m in 0..self.meters {
            for t in 0..self.steps {
                pv[t] += self.pv(m, t);
                load[t] += self.load(m, t);
            }
        }
        let n = self.meters as f64;
        pv.iter_mut().for_each(|v| *v /= n);
        load.iter_mut().for_each(|v| *v /= n);
        (pv, load)
    }
}

/// Circular distance in hours.
fn hour_gap(h: f64, center: f64) -> f64 {
    let d = (h - center).abs() % 24.0;
    d.min(24.0 - d)
}

fn bump(h: f64, center: f64, width: f64) -> f64 {
    let d = hour_gap(h, center);
    (-d * d / (2.0 * width * width)).exp()
}

/// Household demand archetypes: evening-peaked, morning-peaked, daytime-flat.
fn archetype_shapes(h: f64) -> [f64; 3] {
    [
        0.30 + 1.35 * bump(h, 19.5, 2.2) + 0.45 * bump(h, 8.0, 1.5),
        0.30 + 1.10 * bump(h, 7.5, 1.8) + 0.55 * bump(h, 18.5, 2.0),
        0.45 + 0.70 * bump(h, 13.0, 4.0),
    ]
}

fn daylight(h: f64, season: Season) -> f64 {
    let (rise, set, scale) = match season {
        Season::Summer => (5.5, 21.5, 1.0),
        Season::Winter => (8.5, 16.5, 0.08),
    };
    if h <= rise || h >= set {
        return 0.0;
    }
    let x = (h - rise) / (set - rise);
    scale * (std::f64::consts::PI * x).sin().max(0.0).powf(1.2)
}

/// Generates per-house load and PV series for `meters` houses, all in one
/// demographic group.
pub fn generate_injections(cfg: &ProfileConfig, meters: usize) -> Result<Injections> {
    generate_injections_grouped(cfg, &vec![0; meters])
}

/// Grouped variant: houses with the same group index (typically one feeder)
/// share a demographic shape tilt and day-level energy factors, so different
/// groups decorrelate the way different streets do.
pub fn generate_injections_grouped(cfg: &ProfileConfig, groups: &[usize]) -> Result<Injections> {
    cfg.validate()?;
    let meters = groups.len();
    if meters == 0 {
        return Err(Error::EmptyInput);
    }
    let steps = cfg.total_steps();
    let spd = cfg.steps_per_day();
    let mut rng = rng_for(cfg.rng_seed, "profiles");
    let n_groups = groups.iter().copied().max().unwrap_or(0) + 1;

    // Group-level demographics: archetype tilt and per-day energy factor.
    let group_tilt: Vec<[f64; 3]> = (0..n_groups)
        .map(|_| {
            let raw = [
                rng.gen_range(0.6f64..1.6),
                rng.gen_range(0.3f64..1.1),
                rng.gen_range(0.3f64..1.1),
            ];
            raw
        })
        .collect();
    let group_day: Vec<Vec<f64>> = (0..n_groups)
        .map(|_| (0..cfg.days).map(|_| rng.gen_range(0.85..1.15)).collect())
        .collect();

    // Per-house statics.
    let scales: Vec<f64> = (0..meters).map(|_| rng.gen_range(0.65..1.35)).collect();
    let mixes: Vec<[f64; 3]> = (0..meters)
        .map(|m| {
            let tilt = group_tilt[groups[m]];
            let raw = [
                (rng.gen_range(0.05f64..1.0) + 0.8) * tilt[0],
                rng.gen_range(0.05f64..1.0) * 0.6 * tilt[1],
                rng.gen_range(0.05f64..1.0) * 0.6 * tilt[2],
            ];
            let sum: f64 = raw.iter().sum();
            [raw[0] / sum, raw[1] / sum, raw[2] / sum]
        })
        .collect();

    // PV ownership and sizes.
    let pv_count = (cfg.pv_penetration * meters as f64).floor() as usize;
    let mut owner_order: Vec<usize> = (0..meters).collect();
    owner_order.shuffle(&mut rng);
    let mut has_pv = vec![false; meters];
    for &m in owner_order.iter().take(pv_count) {
        has_pv[m] = true;
    }
    let pv_sizes: Vec<f64> = (0..meters)
        .map(|m| if has_pv[m] { cfg.pv_peak_kw * rng.gen_range(0.6..1.4) } else { 0.0 })
        .collect();

    // Per-day factors: household energy variation and shared clear-sky index.
    let day_factor: Vec<Vec<f64>> = (0..meters)
        .map(|_| (0..cfg.days).map(|_| rng.gen_range(0.75..1.30)).collect())
        .collect();
    let clearsky: Vec<f64> = (0..cfg.days).map(|_| rng.gen_range(0.30..1.0)).collect();
    // Shared slow cloud ripple, one value per step.
    let mut cloud = vec![1.0f64; steps];
    let cloud_noise = Normal::new(0.0, 0.05).unwrap();
    let mut c = 0.0f64;
    for value in cloud.iter_mut() {
        c = 0.9 * c + cloud_noise.sample(&mut rng);
        *value = (1.0 + c).clamp(0.3, 1.3);
    }

    let mult_noise = Normal::new(0.0, cfg.load_noise_sd).unwrap();
    let add_noise = Normal::new(0.0, cfg.load_noise_add_kw).unwrap();

    let start_minutes = {
        use chrono::Timelike;
        cfg.start.time().hour() as f64 * 60.0 + cfg.start.time().minute() as f64
    };

    let mut load_kw = vec![0.0f64; meters * steps];
    let mut pv_kw = vec![0.0f64; meters * steps];
    for m in 0..meters {
        for t in 0..steps {
            let day = t / spd;
            let minute = start_minutes + (t as f64) * cfg.resolution_minutes as f64;
            let h = (minute / 60.0) % 24.0;
            let shapes = archetype_shapes(h);
            let mix = mixes[m];
            let shape = mix[0] * shapes[0] + mix[1] * shapes[1] + mix[2] * shapes[2];
            let mult = (1.0 + mult_noise.sample(&mut rng)).max(0.05);
            let add = add_noise.sample(&mut rng);
            let load = cfg.base_load_kw
                * scales[m]
                * day_factor[m][day]
                * group_day[groups[m]][day]
                * shape
                * mult
                + add;
            load_kw[m * steps + t] = load.max(0.02);
            if pv_sizes[m] > 0.0 {
                pv_kw[m * steps + t] =
                    pv_sizes[m] * daylight(h, cfg.season) * clearsky[day] * cloud[t];
            }
        }
    }
    Ok(Injections { load_kw, pv_kw, meters, steps })
}

/// MV-side per-unit voltage deviation trace for one source: shared slow
/// sinusoid plus a mean-reverting walk, with a small per-source component.
/// The walk reverts so long horizons stay stationary.
pub fn mv_traces(cfg: &ProfileConfig, source_ids: &[String]) -> Vec<Vec<f64>> {
    let steps = cfg.total_steps();
    let mut rng = rng_for(cfg.rng_seed, "mv");
    let phase0: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let walk_noise = Normal::new(0.0, cfg.mv_walk_sd).unwrap();

    let mut shared = vec![0.0f64; steps];
    let mut w = 0.0f64;
    let spd = cfg.steps_per_day() as f64;
    for (t, value) in shared.iter_mut().enumerate() {
        w = 0.985 * w + walk_noise.sample(&mut rng);
        let angle = std::f64::consts::TAU * (t as f64) / spd + phase0;
        *value = cfg.mv_amplitude * angle.sin() + w;
    }

    source_ids
        .iter()
        .map(|id| {
            let mut rng = rng_for(cfg.rng_seed, &format!("mv.{id}"));
            let idio_noise = Normal::new(0.0, cfg.mv_walk_sd * 0.5).unwrap();
            let mut w = 0.0f64;
            shared
                .iter()
                .map(|s| {
                    w = 0.985 * w + idio_noise.sample(&mut rng);
                    s + w
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injections_deterministic_and_positive() {
        let cfg = ProfileConfig { days: 2, rng_seed: 5, ..Default::default() };
        let a = generate_injections(&cfg, 10).unwrap();
        let b = generate_injections(&cfg, 10).unwrap();
        assert_eq!(a.load_kw, b.load_kw);
        assert!(a.load_kw.iter().all(|&v| v > 0.0));
        assert!(a.pv_kw.iter().all(|&v| v == 0.0)); // penetration 0
    }

    #[test]
    fn summer_pv_peaks_midday_winter_near_zero() {
        let mut cfg = ProfileConfig {
            days: 3,
            pv_penetration: 1.0,
            rng_seed: 9,
            ..Default::default()
        };
        let summer = generate_injections(&cfg, 5).unwrap();
        cfg.season = Season::Winter;
        let winter = generate_injections(&cfg, 5).unwrap();
        let spd = cfg.steps_per_day();
        let noon = spd / 2;
        let night = 2; // 00:30
        let sum_summer_noon: f64 = (0..5).map(|m| summer.pv(m, noon)).sum();
        let sum_summer_night: f64 = (0..5).map(|m| summer.pv(m, night)).sum();
        let sum_winter_noon: f64 = (0..5).map(|m| winter.pv(m, noon)).sum();
        assert!(sum_summer_noon > 0.5);
        assert_eq!(sum_summer_night, 0.0);
        assert!(sum_winter_noon < 0.15 * sum_summer_noon);
    }

    #[test]
    fn mv_traces_shared_but_not_identical() {
        let cfg = ProfileConfig { days: 2, rng_seed: 3, ..Default::default() };
        let traces = mv_traces(&cfg, &["T1".into(), "T2".into()]);
        assert_eq!(traces.len(), 2);
        assert_ne!(traces[0], traces[1]);
        // strongly correlated through the shared component
        let n = traces[0].len() as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
        let (m0, m1) = (mean(&traces[0]), mean(&traces[1]));
        let mut cov = 0.0;
        let mut v0 = 0.0;
        let mut v1 = 0.0;
        for t in 0..traces[0].len() {
            cov += (traces[0][t] - m0) * (traces[1][t] - m1);
            v0 += (traces[0][t] - m0).powi(2);
            v1 += (traces[1][t] - m1).powi(2);
        }
        assert!(cov / (v0.sqrt() * v1.sqrt()) > 0.8);
        // bounded deviations
        assert!(traces[0].iter().all(|v| v.abs() < 0.05));
    }
}
