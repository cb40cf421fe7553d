//! Piecewise-constant switch-state schedules.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::SwitchBar;
use crate::seed::rng_for;

/// Per-timestep encoded class labels over `days × steps_per_day` steps.
///
/// Dwell times draw uniformly from `dwell_range` (in timesteps). Without
/// bias the next state is uniform over the other states, so every dwell
/// boundary is a visible change; with bias, segments draw i.i.d. from the
/// weights, producing class imbalance.
pub fn schedule_switch_states(
    bar: &SwitchBar,
    days: usize,
    steps_per_day: usize,
    dwell_range: (usize, usize),
    bias: Option<&[f64]>,
    rng_seed: u64,
) -> Result<Vec<u32>> {
    let j = bar.class_count();
    if j == 0 {
        return Err(Error::Config("empty state catalog".into()));
    }
    let (lo, hi) = dwell_range;
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!("invalid dwell range [{lo}, {hi}]")));
    }
    if let Some(w) = bias {
        if w.len() != j {
            return Err(Error::DimensionMismatch { expected: j, got: w.len() });
        }
        if w.iter().any(|&x| x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("bias weights must be nonnegative and sum > 0".into()));
        }
    }
    let total = days * steps_per_day;
    let mut rng = rng_for(rng_seed, "schedule");
    let labels: Vec<u32> = bar.encoding.clone();

    let draw_biased = |rng: &mut rand_chacha::ChaCha8Rng, w: &[f64]| -> u32 {
        let sum: f64 = w.iter().sum();
        let mut x = rng.gen_range(0.0..sum);
        for (i, &wi) in w.iter().enumerate() {
            if x < wi {
                return labels[i];
            }
            x -= wi;
        }
        labels[j - 1]
    };

    let mut out = Vec::with_capacity(total);
    let mut current = match bias {
        Some(w) => draw_biased(&mut rng, w),
        None => labels[rng.gen_range(0..j)],
    };
    while out.len() < total {
        let dwell = rng.gen_range(lo..=hi);
        for _ in 0..dwell {
            if out.len() == total {
                break;
            }
            out.push(current);
        }
        current = match bias {
            Some(w) => draw_biased(&mut rng, w),
            None => {
                if j == 1 {
                    labels[0]
                } else {
                    // uniform over the other states
                    let mut next = labels[rng.gen_range(0..j)];
                    while next == current {
                        next = labels[rng.gen_range(0..j)];
                    }
                    next
                }
            }
        };
    }
    Ok(out)
}
