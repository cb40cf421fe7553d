//! Correlation kernel: Pearson correlation, the Fisher-z variant with a
//! damping constant, and the MFP dissimilarity used as the clustering
//! distance. All pair statistics run over pairwise-complete observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DistanceKind, DistanceMatrix, VoltagePanel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationConfig {
    /// Denominator guard in the Fisher-z variant; keeps FPCC finite at rho = 1.
    pub alpha: f64,
    /// Shape offset inside the MFP softplus. Shifts the rho band where the
    /// distance discriminates; 0 places it around rho ~ 0.5, strongly negative
    /// values move it toward rho ~ 1.
    pub a: f64,
    /// Minimum count of jointly observed timesteps for a valid pair.
    pub min_overlap: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self { alpha: 0.01, a: 0.0, min_overlap: 16 }
    }
}

impl CorrelationConfig {
    /// The setting the shipped benchmark configs use for feeder separation:
    /// voltage series all correlate highly, so the offset shifts the MFP
    /// discrimination band into the high-rho regime (zero distance only
    /// above rho ~ 0.91).
    pub fn feeder_preset() -> Self {
        Self { a: -8.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be > 0".into()));
        }
        if self.min_overlap < 3 {
            return Err(Error::Config("min_overlap must be >= 3".into()));
        }
        Ok(())
    }
}

/// Pearson correlation over the jointly observed cells of two series.
pub fn pcc(
    x: &[f64],
    mask_x: &[bool],
    y: &[f64],
    mask_y: &[bool],
    cfg: &CorrelationConfig,
) -> Result<f64> {
    debug_assert_eq!(x.len(), y.len());
    let mut n = 0usize;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for t in 0..x.len() {
        if mask_x[t] && mask_y[t] {
            n += 1;
            sum_x += x[t];
            sum_y += y[t];
        }
    }
    if n < cfg.min_overlap {
        return Err(Error::InsufficientOverlap {
            a: "x".into(),
            b: "y".into(),
            overlap: n,
            required: cfg.min_overlap,
        });
    }
    let mean_x = sum_x / n as f64;
    let mean_y = sum_y / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for t in 0..x.len() {
        if mask_x[t] && mask_y[t] {
            let dx = x[t] - mean_x;
            let dy = y[t] - mean_y;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    }
    if sxx <= 0.0 {
        return Err(Error::UndefinedCorrelation("x".into()));
    }
    if syy <= 0.0 {
        return Err(Error::UndefinedCorrelation("y".into()));
    }
    // Cauchy-Schwarz saturation means the series are exactly linear up to
    // rounding; return the exact pole so pcc(x, x) == 1.
    if sxy * sxy >= sxx * syy {
        return Ok(if sxy >= 0.0 { 1.0 } else { -1.0 });
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Fisher-z variant: ln((1 + rho) / (1 - rho + alpha)); finite on [-1, 1].
pub fn fpcc(rho: f64, cfg: &CorrelationConfig) -> f64 {
    ((1.0 + rho) / (1.0 - rho + cfg.alpha)).ln()
}

fn mfp_from_rho(rho: f64, cfg: &CorrelationConfig) -> f64 {
    let z = cfg.a + 4.0 * fpcc(rho, cfg);
    // Softplus evaluated stably for large |z|.
    let softplus = if z > 30.0 { z } else { z.exp().ln_1p() };
    // Softplus positivity keeps this below 1; the clamp covers the rounding
    // case where (1 - tiny) lands exactly on 1.0 in doubles.
    (1.0 - (softplus / 4.0).min(1.0)).min(1.0 - f64::EPSILON)
}

/// MFP dissimilarity in [0, 1): 1 - min{softplus(a + 4·FPCC)/4, 1}.
pub fn mfp(
    x: &[f64],
    mask_x: &[bool],
    y: &[f64],
    mask_y: &[bool],
    cfg: &CorrelationConfig,
) -> Result<f64> {
    let rho = pcc(x, mask_x, y, mask_y, cfg)?;
    Ok(mfp_from_rho(rho, cfg))
}

/// MFP as a function of an externally supplied correlation value.
pub fn mfp_of_rho(rho: f64, cfg: &CorrelationConfig) -> f64 {
    mfp_from_rho(rho, cfg)
}

/// All-pairs distance matrix over the panel's meters.
///
/// Pairs that fail the overlap or variance preconditions are flagged invalid
/// rather than silently filled; callers opt into [`DistanceMatrix::fill_invalid`].
pub fn distance_matrix(
    panel: &VoltagePanel,
    meter_ids: &[String],
    kind: DistanceKind,
    cfg: &CorrelationConfig,
) -> Result<DistanceMatrix> {
    cfg.validate()?;
    let n = panel.meters();
    if n < 2 {
        return Err(Error::TooFewMeters { required: 2, got: n });
    }
    if meter_ids.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: meter_ids.len() });
    }
    let mut values = vec![0.0f64; n * n];
    let mut invalid = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = pair_distance(panel, i, j, kind, cfg);
            match d {
                Ok(d) => {
                    values[i * n + j] = d;
                    values[j * n + i] = d;
                }
                Err(
                    Error::InsufficientOverlap { .. } | Error::UndefinedCorrelation(_),
                ) => invalid.push((i, j)),
                Err(e) => return Err(e),
            }
        }
    }
    DistanceMatrix::from_symmetric(kind, meter_ids.to_vec(), values, invalid)
}

fn pair_distance(
    panel: &VoltagePanel,
    i: usize,
    j: usize,
    kind: DistanceKind,
    cfg: &CorrelationConfig,
) -> Result<f64> {
    let (xi, mi) = (panel.values_row(i), panel.mask_row(i));
    let (xj, mj) = (panel.values_row(j), panel.mask_row(j));
    match kind {
        DistanceKind::Mfp => mfp(xi, mi, xj, mj, cfg),
        DistanceKind::PccComplement => {
            let rho = pcc(xi, mi, xj, mj, cfg)?;
            Ok(1.0 - rho.clamp(0.0, 1.0))
        }
        DistanceKind::Euclidean => euclidean(xi, mi, xj, mj, panel.steps(), cfg),
    }
}

/// Euclidean distance over pairwise-complete cells, scaled by sqrt(T/overlap)
/// so distances stay comparable across pairs with different overlap.
pub fn euclidean(
    x: &[f64],
    mask_x: &[bool],
    y: &[f64],
    mask_y: &[bool],
    total_steps: usize,
    cfg: &CorrelationConfig,
) -> Result<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for t in 0..x.len() {
        if mask_x[t] && mask_y[t] {
            n += 1;
            let d = x[t] - y[t];
            sum += d * d;
        }
    }
    if n < cfg.min_overlap.min(x.len()) {
        return Err(Error::InsufficientOverlap {
            a: "x".into(),
            b: "y".into(),
            overlap: n,
            required: cfg.min_overlap.min(x.len()),
        });
    }
    Ok((sum * total_steps as f64 / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn cfg() -> CorrelationConfig {
        CorrelationConfig::default()
    }

    fn all(n: usize) -> Vec<bool> {
        vec![true; n]
    }

    #[test]
    fn pcc_self_is_one() {
        let x = [1.0, 2.0, 3.0, 1.5];
        let c = CorrelationConfig { min_overlap: 3, ..cfg() };
        assert_relative_eq!(pcc(&x, &all(4), &x, &all(4), &c).unwrap(), 1.0);
    }

    #[test]
    fn pcc_perfect_anticorrelation() {
        let x = [1.0, 2.0, 3.0];
        let y = [3.0, 2.0, 1.0];
        let c = CorrelationConfig { min_overlap: 3, ..cfg() };
        assert_relative_eq!(pcc(&x, &all(3), &y, &all(3), &c).unwrap(), -1.0);
    }

    #[test]
    fn pcc_reference_value() {
        // cov = 3, sd_x = sqrt(2), sd_y = sqrt(42)/3 -> rho = 9/sqrt(84)
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 4.0];
        let c = CorrelationConfig { min_overlap: 3, ..cfg() };
        let rho = pcc(&x, &all(3), &y, &all(3), &c).unwrap();
        assert_relative_eq!(rho, 9.0 / 84.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(rho, 0.98198, epsilon = 1e-5);
    }

    #[test]
    fn pcc_errors() {
        let x = [1.0, 2.0, 3.0];
        let c = CorrelationConfig { min_overlap: 3, ..cfg() };
        // insufficient overlap
        let m = [true, true, false];
        assert!(matches!(
            pcc(&x, &m, &x, &m, &c),
            Err(Error::InsufficientOverlap { overlap: 2, .. })
        ));
        // zero variance
        let flat = [5.0, 5.0, 5.0];
        assert!(matches!(
            pcc(&flat, &all(3), &x, &all(3), &c),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn fpcc_reference_values() {
        assert_relative_eq!(fpcc(1.0, &cfg()), 200.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(fpcc(0.0, &cfg()), (1.0f64 / 1.01).ln(), epsilon = 1e-12);
        assert_relative_eq!(fpcc(0.0, &cfg()), -0.00995, epsilon = 1e-5);
        let tiny = CorrelationConfig { alpha: 1e-12, ..cfg() };
        assert_relative_eq!(fpcc(0.0, &tiny), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn mfp_reference_values() {
        // a + 4·FPCC = 0 -> 1 - ln(2)/4
        let c = cfg();
        // invert: fpcc(rho) = 0 -> (1+rho) = (1-rho+alpha) -> rho = alpha/2
        let rho0 = c.alpha / 2.0;
        assert_relative_eq!(mfp_of_rho(rho0, &c), 1.0 - 2.0f64.ln() / 4.0, epsilon = 1e-12);
        assert_relative_eq!(mfp_of_rho(rho0, &c), 0.8267, epsilon = 1e-4);
        // rho = 1 saturates to 0
        assert_eq!(mfp_of_rho(1.0, &c), 0.0);
    }

    #[test]
    fn euclidean_reference() {
        let c = CorrelationConfig { min_overlap: 2, ..cfg() };
        let x = [1.0, 1.0];
        let y = [1.0, 2.0];
        assert_relative_eq!(euclidean(&x, &all(2), &y, &all(2), 2, &c).unwrap(), 1.0);
    }

    #[test]
    fn distance_matrix_structure() {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        // 3 meters, 20 steps, deterministic distinct patterns
        let steps = 20;
        let mut values = Vec::new();
        for n in 0..3u32 {
            for t in 0..steps {
                let t = t as f64;
                values.push(230.0 + (n as f64 + 1.0) * (t * 0.37 + n as f64).sin() + 0.01 * t);
            }
        }
        let panel =
            VoltagePanel::new(values, vec![true; 3 * steps], 3, steps, 15, start).unwrap();
        let ids: Vec<String> = (0..3).map(|i| format!("m{i}")).collect();
        let m = distance_matrix(&panel, &ids, DistanceKind::Mfp, &cfg()).unwrap();
        m.require_valid().unwrap();
        for i in 0..3 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        // identical meters -> MFP 0
        let twin = panel.restrict_rows(&[0, 0]).unwrap();
        let twin_ids = vec!["a".to_string(), "b".to_string()];
        let m2 = distance_matrix(&twin, &twin_ids, DistanceKind::Mfp, &cfg()).unwrap();
        assert_eq!(m2.get(0, 1), 0.0);
    }

    proptest! {
        #[test]
        fn mfp_stays_in_unit_interval_and_monotone(
            rho1 in -1.0f64..=1.0,
            rho2 in -1.0f64..=1.0,
            a in -20.0f64..1.0,
            alpha in 1e-4f64..0.2,
        ) {
            let c = CorrelationConfig { alpha, a, min_overlap: 3 };
            let (lo, hi) = if rho1 <= rho2 { (rho1, rho2) } else { (rho2, rho1) };
            let d_lo = mfp_of_rho(lo, &c);
            let d_hi = mfp_of_rho(hi, &c);
            prop_assert!((0.0..1.0).contains(&d_lo));
            prop_assert!((0.0..1.0).contains(&d_hi));
            // higher correlation never increases the distance
            prop_assert!(d_hi <= d_lo + 1e-12);
            // fpcc strictly increasing
            if hi - lo > 1e-9 {
                prop_assert!(fpcc(hi, &c) > fpcc(lo, &c));
            }
        }

        #[test]
        fn mfp_symmetric_in_arguments(vs in proptest::collection::vec(200.0f64..260.0, 24)) {
            let x = &vs[..12];
            let y = &vs[12..];
            let c = CorrelationConfig { min_overlap: 3, ..CorrelationConfig::default() };
            let m_all = vec![true; 12];
            let fwd = mfp(x, &m_all, y, &m_all, &c);
            let rev = mfp(y, &m_all, x, &m_all, &c);
            match (fwd, rev) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric error behavior"),
            }
        }
    }
}
