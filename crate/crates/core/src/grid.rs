//! Default grids: moment orders, box sizes and exit-time thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::log_space;

pub const DEFAULT_ORDER_MIN: f64 = -4.0;
pub const DEFAULT_ORDER_MAX: f64 = 8.0;
pub const DEFAULT_ORDER_STEP: f64 = 0.25;
/// Orders outside this band are accepted but flagged as statistically weak.
pub const SIGNIFICANT_ORDERS: (f64, f64) = (DEFAULT_ORDER_MIN, DEFAULT_ORDER_MAX);
/// Hard limit on |order| for the partition sums.
pub const MAX_ABS_ORDER: f64 = 20.0;

pub const DEFAULT_POINTS_PER_DECADE: usize = 10;
/// Smallest number of boxes (or exit times) a retained scale must produce.
pub const MIN_BOXES: usize = 10;

/// Evenly spaced orders from `min` to `max` inclusive.
pub fn order_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max < min {
        return Err(invalid(format!("bad order grid [{min}, {max}] step {step}")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min + i as f64 * step).collect())
}

/// Box sizes that tile a common prefix of the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    /// Largest 7-smooth length not exceeding the series length.
    pub covered_len: usize,
    pub sizes: Vec<usize>,
}

/// Divisors of a highly composite covered length, chosen closest (in log
/// scale) to a log-spaced target grid from 1 to `covered_len / min_boxes`.
pub fn box_size_grid(len: usize, per_decade: usize, min_boxes: usize) -> Result<BoxGrid> {
    if per_decade == 0 || min_boxes == 0 {
        return Err(invalid("grid density and minimum box count must be positive"));
    }
    if len < min_boxes {
        return Err(invalid(format!(
            "series of {len} samples cannot hold {min_boxes} boxes"
        )));
    }
    let covered_len = largest_smooth_at_most(len);
    let divisors = divisors_of_smooth(covered_len);
    let max_size = (covered_len / min_boxes).max(1);
    let decades = (max_size as f64).log10();
    let points = (decades * per_decade as f64).round() as usize + 1;
    let targets = log_space(1.0, max_size as f64, points);

    let mut sizes: Vec<usize> = targets
        .iter()
        .map(|&t| {
            *divisors
                .iter()
                .filter(|&&d| d <= max_size)
                .min_by(|&&a, &&b| {
                    let da = ((a as f64) / t).ln().abs();
                    let db = ((b as f64) / t).ln().abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("1 always divides")
        })
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    Ok(BoxGrid { covered_len, sizes })
}

/// Log-spaced thresholds mirroring the box grid: `s * v_mean` for
/// `s` in `[s_min, s_max]`.
pub fn threshold_grid(v_mean: f64, s_min: f64, s_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(v_mean > 0.0 && s_min > 0.0 && s_max > s_min) || per_decade == 0 {
        return Err(invalid(format!(
            "bad threshold grid: v_mean {v_mean}, scales [{s_min}, {s_max}]"
        )));
    }
    let points = ((s_max / s_min).log10() * per_decade as f64).round() as usize + 1;
    Ok(log_space(s_min * v_mean, s_max * v_mean, points.max(2)))
}

/// Thresholds `V / J` for the exit counts `J = covered_len / s` of the box
/// grid, so each threshold splits the total into a whole number of exits.
/// Returned in increasing order.
pub fn exit_threshold_grid(total: f64, len: usize, per_decade: usize, min_exits: usize) -> Result<Vec<f64>> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(invalid(format!("integrated volatility must be positive, got {total}")));
    }
    let boxes = box_size_grid(len, per_decade, min_exits)?;
    Ok(boxes
        .sizes
        .iter()
        .map(|&s| {
            let j = (boxes.covered_len / s) as f64;
            let mut dv = total / j;
            while (total / dv).floor() < j {
                dv = dv.next_down();
            }
            dv
        })
        .collect())
}

fn largest_smooth_at_most(n: usize) -> usize {
    let mut best = 1usize;
    let mut p2 = 1usize;
    while p2 <= n {
        let mut p3 = p2;
        while p3 <= n {
            let mut p5 = p3;
            while p5 <= n {
                let mut p7 = p5;
                while p7 <= n {
                    best = best.max(p7);
                    match p7.checked_mul(7) {
                        Some(v) => p7 = v,
                        None => break,
                    }
                }
                match p5.checked_mul(5) {
                    Some(v) => p5 = v,
                    None => break,
                }
            }
            match p3.checked_mul(3) {
                Some(v) => p3 = v,
                None => break,
            }
        }
        match p2.checked_mul(2) {
            Some(v) => p2 = v,
            None => break,
        }
    }
    best
}

fn divisors_of_smooth(n: usize) -> Vec<usize> {
    let mut divisors = vec![1usize];
    let mut rest = n;
    for p in [2usize, 3, 5, 7] {
        let mut e = 0;
        while rest.is_multiple_of(p) {
            rest /= p;
            e += 1;
        }
        let current = divisors.clone();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            divisors.extend(current.iter().map(|d| d * pk));
        }
    }
    debug_assert_eq!(rest, 1);
    divisors.sort_unstable();
    divisors
}
